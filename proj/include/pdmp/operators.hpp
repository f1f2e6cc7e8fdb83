#pragma once

#include "pdmp/policy.hpp"

#include <optional>
#include <span>
#include <vector>

namespace pdmp {

/// Mesh refinement controls shared by every quadrature along flow lines.
struct DiscretizationOptions {
    /// Minimum number of sub-intervals per cell.
    std::size_t resolution = 64;
    /// Node spacing is at most spacing_factor / (local sup of the jump rate).
    double spacing_factor = 0.25;

    DiscretizationOptions refined(std::size_t factor = 2) const {
        return {resolution * factor, spacing_factor / static_cast<double>(factor)};
    }
};

/// Table lookup weights: value = (1 - theta) * T[lo] + theta * T[hi].
struct NodeSample {
    std::size_t lo = 0;
    std::size_t hi = 0;
    double theta = 0.0;
};

enum class CellEnd { grid, boundary, open };

/// The stretch of a flow line on which the action of one grid point is held:
/// from the grid point to the next grid or boundary node along the flow, or an
/// unbounded stretch when the flow never reaches another node.
struct Cell {
    std::size_t origin = 0;
    CellEnd end = CellEnd::open;
    std::size_t next = 0;  // grid index or boundary index, per `end`
    /// Open cell whose tables stay at their node values forever.
    bool frozen = false;
    std::vector<double> times;   // local, times.front() == 0
    std::vector<double> states;
    std::vector<NodeSample> samples;

    double duration() const { return times.back(); }
};

/// Integrals over one cell under one action, relative to the survival weight at
/// the cell entrance.
struct CellMoments {
    double sojourn = 0.0;   // integral of the discounted survival
    double cost = 0.0;      // same, weighted by the running cost
    double mass_lo = 0.0;   // coefficient of Q(lo, a) in the jump distribution
    double mass_hi = 0.0;   // coefficient of Q(hi, a)
    double survival = 0.0;  // discounted survival across the cell (0 for open cells)
    double truncation = 0.0;  // weight of the analytic tail of an open cell
    std::size_t lo = 0, hi = 0;
};

/// Cells for every interior grid point of a model. The model must outlive it.
class FlowDiscretization {
public:
    explicit FlowDiscretization(const PdmpModel& model, DiscretizationOptions options = {});

    const PdmpModel& model() const { return *model_; }
    const DiscretizationOptions& options() const { return options_; }
    const Cell& cell(std::size_t i) const { return cells_[i]; }
    std::size_t size() const { return cells_.size(); }

    /// Cells ordered so that a cell appears after the cell it flows into.
    const std::vector<std::size_t>& backward_order() const { return order_; }

    /// Table lookup weights at an arbitrary coordinate (clamped outside the node hull).
    NodeSample sample(double y) const;

    /// Undiscounted moments, cached per (cell, action).
    const CellMoments& moments(std::size_t cell, int action) const;

    /// Cell index containing coordinate y, if any.
    std::optional<std::size_t> cell_containing(double y) const;

    /// Cell i restarted from a coordinate y inside it.
    Cell partial_cell(std::size_t i, double y) const;

private:
    Cell make_cell(std::size_t i, const Flow& flow) const;
    void fill_mesh(Cell& cell, const Flow& flow, double start, double duration, std::size_t lo,
                   std::size_t hi) const;

    const PdmpModel* model_;
    DiscretizationOptions options_;
    std::vector<double> sorted_coords_;
    std::vector<std::size_t> sorted_nodes_;
    std::vector<Cell> cells_;
    std::vector<std::size_t> order_;
    std::vector<std::vector<CellMoments>> moments_;
};

/// Moments of a cell for a given action and discount rate alpha >= -c.
CellMoments cell_moments(const PdmpModel& model, const Cell& cell, int action, double alpha);

/// Quadrature weights for integrals of exp(-alpha s - Lambda(s)) phi(s) over a
/// mesh with an even number of segments: phi is integrated with node weights,
/// Lambda with the trapezoid rule. The weights are the Richardson combination
/// of the exponentially fitted trapezoid rule on the mesh and on every other
/// node, so for alpha = 0 the identity sum_j node[j] lambda_j + end = 1 holds exactly.
struct NodeWeights {
    std::vector<double> node;
    double end = 0.0;   // survival weight at the last node
    double tail = 0.0;  // integral over the frozen tail (open meshes)
};
NodeWeights quadrature_weights(std::span<const double> times, std::span<const double> rates, double alpha,
                               bool tail);

/// Feedback selector sampled along the flow line from one origin.
struct PolicyPath {
    double origin = 0.0;
    std::vector<double> times;
    std::vector<double> states;
    std::vector<NodeSample> samples;
    std::vector<int> actions;  // one per segment
    /// First node of every cell traversed; a cell ends where the next one starts.
    std::vector<std::size_t> pieces;
    /// Boundary point reached at the hitting time, if any.
    std::optional<std::size_t> boundary;
    int boundary_action = -1;
    /// Open path: tables stay at the last node for t > times.back().
    bool open = false;
    int tail_action = -1;

    double hit_time() const { return boundary ? times.back() : kInfinity; }
};

/// Path of the feedback selector from x. x must lie in some cell.
PolicyPath build_path(const FlowDiscretization& disc, const FeedbackPolicy& policy, double x);

/// Cumulative jump rate along the path at time t.
double cum_rate(const PdmpModel& model, const PolicyPath& path, double t);

/// Discounted integral of v (node x action table) along the path.
double op_L(const PdmpModel& model, double alpha, const Matrix& v, const PolicyPath& path);

/// op_L with v identically one.
double op_calL(const PdmpModel& model, double alpha, const PolicyPath& path);

/// Discounted boundary term for w (boundary x action table); zero when the path never hits.
double op_H(const PdmpModel& model, double alpha, const Matrix& w, const PolicyPath& path);

/// Jump-kernel operator applied to h (interior table).
double op_G(const PdmpModel& model, double alpha, const Vector& h, const PolicyPath& path);

/// Row of the jump kernel for one path.
Vector kernel_row(const PdmpModel& model, double alpha, const PolicyPath& path);

/// All per-state quantities of a feedback policy.
struct PolicyTerms {
    Vector sojourn;   // calL
    Vector running;   // L f
    Vector boundary;  // H r
    Matrix kernel;    // G
    double truncation = 0.0;  // largest tail weight among open cells
};

PolicyTerms policy_terms(const FlowDiscretization& disc, const FeedbackPolicy& policy,
                         double alpha = 0.0);

/// Jump kernel matrix over the interior grid.
Matrix kernel_matrix(const FlowDiscretization& disc, const FeedbackPolicy& policy, double alpha = 0.0);
Matrix kernel_matrix(const PdmpModel& model, const FeedbackPolicy& policy, double alpha = 0.0);

/// Q h at a node under an action.
double kernel_apply(const PdmpModel& model, std::size_t node, int action, const Vector& h);

}  // namespace pdmp
