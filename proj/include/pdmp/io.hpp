#pragma once

#include "pdmp/audit.hpp"
#include "pdmp/pia.hpp"
#include "pdmp/simulator.hpp"

#include <filesystem>
#include <string>

#include <json.hpp>

namespace pdmp {

inline constexpr const char* kResultSchema = "pdmp-result/1";
inline constexpr const char* kToolName = "pdmp-avgctl";
inline constexpr const char* kToolVersion = "0.1.0";

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

/// Provenance stamped into every artifact.
struct ArtifactInfo {
    std::string model_sha256;
    std::string model_name;
};

nlohmann::json envelope(const ArtifactInfo& info, const std::string& kind);
/// First line of every CSV artifact.
std::string csv_header(const ArtifactInfo& info);

nlohmann::json to_json(const FeedbackPolicy& policy);
FeedbackPolicy policy_from_json(const nlohmann::json& doc);
FeedbackPolicy read_policy(const std::filesystem::path& path);

nlohmann::json to_json(const EvaluationResult& result);
nlohmann::json to_json(const ErgodicityEstimate& est);
nlohmann::json to_json(const AuditReport& report);
nlohmann::json to_json(const SimulationSummary& summary);
nlohmann::json to_json(const ValidationVerdict& verdict);
nlohmann::json to_json(const PiaTrace& trace);

std::string trace_csv(const ArtifactInfo& info, const PiaTrace& trace);
std::string trajectory_csv(const ArtifactInfo& info, const TrajectoryRecord& record);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace pdmp
