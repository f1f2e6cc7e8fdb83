#pragma once

#include "pdmp/flow.hpp"
#include "pdmp/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace pdmp {

inline constexpr const char* kModelSchema = "pdmp-model/1";

/// Interior grid and boundary points.
///
/// Per-state tables of the model are indexed by *node*: the interior points
/// first, in order, followed by the boundary points.
struct StateGrid {
    std::vector<double> points;
    std::vector<double> boundary_points;

    std::size_t interior_size() const { return points.size(); }
    std::size_t boundary_size() const { return boundary_points.size(); }
    std::size_t node_count() const { return points.size() + boundary_points.size(); }
    double node(std::size_t k) const {
        return k < points.size() ? points[k] : boundary_points[k - points.size()];
    }
    std::size_t boundary_node(std::size_t b) const { return points.size() + b; }
};

struct ActionGrid {
    std::vector<double> values;
    /// Feasible action indices per interior point.
    std::vector<std::vector<int>> feasible;
    /// Feasible action indices per boundary point.
    std::vector<std::vector<int>> feasible_boundary;

    std::size_t size() const { return values.size(); }
};

struct ModelConstants {
    double b = 0.0;
    double c = 1.0;
    double delta = 1.0;
    double M = 0.0;
    double K_lambda = 0.0;
    double k_g = 0.5;
    double K_g = 0.0;
};

struct PdmpModel {
    std::string name;
    StateGrid grid;
    ActionGrid actions;
    FlowSpec flow_spec;
    Matrix jump_rate;               // node x action
    Matrix running_cost;            // node x action
    Matrix boundary_cost;           // boundary x action
    std::vector<Matrix> kernel;     // per action: node x interior, row-stochastic
    Vector rate_floor;              // node
    Vector lyapunov_g;              // node
    Vector lyapunov_rbar;           // boundary
    ModelConstants constants;

    Flow flow() const { return Flow(flow_spec, grid.boundary_points); }
    std::size_t interior_size() const { return grid.interior_size(); }
    std::size_t action_count() const { return actions.size(); }
};

/// One failed model invariant.
struct Violation {
    std::string invariant;
    std::string location;
    double magnitude = 0.0;

    std::string describe() const;
};

/// Parses a model document; checks the schema and every table shape.
PdmpModel parse_model(const nlohmann::json& doc);
/// Parses model text; parse errors carry line and column.
PdmpModel parse_model_text(const std::string& text);
/// Reads and parses a model file without checking its semantic invariants.
PdmpModel read_model(const std::filesystem::path& path);
/// read_model followed by validate_model; throws ValidationError on violations.
PdmpModel load_model(const std::filesystem::path& path);

nlohmann::json model_to_json(const PdmpModel& model);

std::vector<Violation> validate_model(const PdmpModel& model);

/// Model parsed fine but breaks one or more invariants.
class ValidationError : public ModelError {
public:
    explicit ValidationError(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

}  // namespace pdmp
