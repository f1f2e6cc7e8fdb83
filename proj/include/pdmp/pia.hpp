#pragma once

#include "pdmp/evaluation.hpp"

#include <string>
#include <vector>

namespace pdmp {

/// Result of one backward-marching sweep of the one-stage functional.
struct Improvement {
    FeedbackPolicy policy;
    /// Per interior state: minimum of the one-stage functional over feedback
    /// choices along the flow line from that state.
    Vector minimum;
    /// Per interior state: the functional under the returned policy.
    Vector value;
};

/// Relative tie tolerance of the improvement step.
inline constexpr double kTieTolerance = 1e-11;

Improvement improve(const FlowDiscretization& disc, double rho, const Vector& h, const FeedbackPolicy& prev,
                    double tie_tol = kTieTolerance);

FeedbackPolicy improve_policy(const FlowDiscretization& disc, double rho, const Vector& h,
                              const FeedbackPolicy& prev);

/// -rho calL + L f + H r + G h along the policy's own flow lines.
Vector one_stage_value(const FlowDiscretization& disc, double rho, const Vector& h, const FeedbackPolicy& policy);

/// sup_x |h(x) - min over feedback choices of the one-stage functional at x|.
/// The minimum over per-cell choices is never above any single-action sweep
/// of one flow line, so a small value also certifies h against those.
double optimality_residual(const FlowDiscretization& disc, double rho, const Vector& h);

enum class PiaStatus { converged, max_iter, cycling };

const char* to_string(PiaStatus status);

struct PiaRecord {
    std::size_t n = 0;
    double rho = 0.0;
    double poisson_residual = 0.0;
    std::size_t changed_states = 0;  // entries changed by the improvement that follows
    double optimality_residual = 0.0;
    double h_change = 0.0;  // sup |h_n - h_{n-1}|, infinite on the first record
    double h_norm = 0.0;    // ||h_n||_g
};

struct PiaTrace {
    std::vector<PiaRecord> records;
    PiaStatus status = PiaStatus::max_iter;
    /// Converged because the improvement step returned the current policy.
    bool policy_fixed = false;
};

struct PiaOptions {
    double tol_rho = 1e-8;
    std::size_t max_iter = 200;
    EvaluationOptions evaluation;
    DiscretizationOptions mesh;
};

struct PiaResult {
    EvaluationResult evaluation;
    FeedbackPolicy policy;
    PiaTrace trace;
};

/// Policy iteration from u0. On cycling or max_iter the best iterate seen is returned.
PiaResult run_pia(const PdmpModel& model, const FeedbackPolicy& u0, const PiaOptions& options = {});
PiaResult run_pia(const FlowDiscretization& disc, const FeedbackPolicy& u0, const PiaOptions& options = {});

}  // namespace pdmp
