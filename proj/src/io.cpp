#include "pdmp/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <system_error>

namespace pdmp {

using nlohmann::json;

namespace {

json number(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

json vec(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
    return a;
}

json vec(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw Error("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

json envelope(const ArtifactInfo& info, const std::string& kind) {
    return {{"schema", kResultSchema},
            {"kind", kind},
            {"tool", {{"name", kToolName}, {"version", kToolVersion}}},
            {"model", {{"name", info.model_name}, {"sha256", info.model_sha256}}}};
}

std::string csv_header(const ArtifactInfo& info) {
    return std::string("# model_sha256=") + info.model_sha256 + " tool=" + kToolName + "/" + kToolVersion + "\n";
}

json to_json(const FeedbackPolicy& policy) {
    return {{"interior", policy.interior}, {"boundary", policy.boundary}};
}

FeedbackPolicy policy_from_json(const json& doc) {
    const json& p = doc.contains("policy") ? doc.at("policy") : doc;
    FeedbackPolicy out;
    try {
        out.interior = p.at("interior").get<std::vector<int>>();
        out.boundary = p.contains("boundary") ? p.at("boundary").get<std::vector<int>>() : std::vector<int>{};
    } catch (const json::exception& e) {
        throw ModelError(std::string("malformed policy document: ") + e.what());
    }
    return out;
}

FeedbackPolicy read_policy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ModelError(path.string() + ": " + e.what());
    }
    return policy_from_json(doc);
}

json to_json(const EvaluationResult& r) {
    return {{"rho", number(r.rho)},
            {"D", number(r.D)},
            {"residual", number(r.residual)},
            {"defect", number(r.defect)},
            {"truncation", number(r.truncation)},
            {"method", r.method},
            {"iterations", r.iterations},
            {"nu", vec(r.nu)},
            {"h", vec(r.h)}};
}

json to_json(const ErgodicityEstimate& est) {
    return {{"a", number(est.a)}, {"kappa", number(est.kappa)}, {"certified", est.certified}, {"decay", vec(est.decay)}};
}

json to_json(const AuditReport& report) {
    json items = json::array();
    for (const auto& i : report.items) {
        json item = {{"id", i.id},
                     {"description", i.description},
                     {"status", to_string(i.status)},
                     {"worst_slack", number(i.worst_slack)},
                     {"location", i.location},
                     {"state_slack", vec(i.state_slack)}};
        if (!i.note.empty()) item["note"] = i.note;
        items.push_back(item);
    }
    json out = {{"passed", report.passed()}, {"items", items}};
    if (report.ergodicity) out["ergodicity"] = to_json(*report.ergodicity);
    return out;
}

json to_json(const SimulationSummary& s) {
    return {{"average", number(s.average)},
            {"std_error", number(s.std_error)},
            {"batch_means", vec(s.batch_means)},
            {"jumps", s.jumps},
            {"boundary_hits", s.boundary_hits},
            {"seed", s.seed},
            {"horizon", number(s.horizon)}};
}

json to_json(const ValidationVerdict& v) {
    return {{"verdict", v.pass ? "pass" : "fail"},
            {"rho", number(v.rho)},
            {"mean", number(v.mean)},
            {"std_error", number(v.std_error)},
            {"allowance", number(v.allowance)},
            {"replication_means", vec(v.replication_means)},
            {"jumps", v.jumps},
            {"boundary_hits", v.boundary_hits}};
}

json to_json(const PiaTrace& trace) {
    json rows = json::array();
    for (const auto& r : trace.records)
        rows.push_back({{"n", r.n},
                        {"rho", number(r.rho)},
                        {"poisson_residual", number(r.poisson_residual)},
                        {"changed_states", r.changed_states},
                        {"optimality_residual", number(r.optimality_residual)},
                        {"h_change", number(r.h_change)},
                        {"h_norm", number(r.h_norm)}});
    return {{"status", to_string(trace.status)}, {"policy_fixed", trace.policy_fixed}, {"records", rows}};
}

std::string trace_csv(const ArtifactInfo& info, const PiaTrace& trace) {
    std::ostringstream os;
    os << csv_header(info) << "n,rho,poisson_residual,changed_states,optimality_residual\n";
    for (const auto& r : trace.records)
        os << r.n << ',' << format_double(r.rho) << ',' << format_double(r.poisson_residual) << ','
           << r.changed_states << ',' << format_double(r.optimality_residual) << '\n';
    return os.str();
}

std::string trajectory_csv(const ArtifactInfo& info, const TrajectoryRecord& record) {
    std::ostringstream os;
    os << csv_header(info) << "t,event_type,state,cost_so_far\n";
    for (const auto& e : record.events)
        os << format_double(e.t) << ',' << to_string(e.type) << ',' << format_double(e.state) << ','
           << format_double(e.cost_so_far) << '\n';
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::system_error(errno, std::generic_category(), "cannot write " + path.string());
    out << text;
}

void write_json(const std::filesystem::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

}  // namespace pdmp
