#pragma once

#include "pdmp/operators.hpp"

#include <string>
#include <vector>

namespace pdmp {

/// Geometric decay of G^k towards its invariant projection in the g-weighted
/// norm: ||G^k h - nu(h)||_g <= a kappa^k ||h||_g for k up to the probe depth.
struct ErgodicityEstimate {
    double a = 1.0;
    double kappa = 1.0;
    bool certified = false;  // kappa < 1 resolved from the data
    std::vector<double> decay;  // ||G^k - 1 nu||_g for k = 0..depth
};

/// g-weighted operator norms of G^k - 1 nu for k = 0..depth and the fitted (a, kappa).
ErgodicityEstimate estimate_ergodicity(const Matrix& kernel, const Vector& nu, const Vector& g,
                                       int depth = 20);

enum class StationaryMethod { automatic, direct, power };
enum class PoissonMethod { direct, neumann };

const char* to_string(PoissonMethod method);

struct EvaluationOptions {
    double tol = 1e-8;
    StationaryMethod stationary = StationaryMethod::automatic;
    /// automatic switches to power iteration above this many states.
    std::size_t direct_limit = 2000;
    std::size_t max_iter = 1'000'000;
    PoissonMethod method = PoissonMethod::direct;
    /// Starting point of the series iteration h <- w + G h.
    Vector neumann_seed;
    /// Skip the refined-mesh residual (the defect on the solving mesh is still checked).
    bool skip_residual = false;
};

struct EvaluationResult {
    double rho = 0.0;
    double D = 0.0;
    Vector h;
    Vector nu;
    Vector sojourn;  // calL per interior state
    Vector cost;     // L f + H r per interior state
    Vector w;        // cost - rho * sojourn
    /// Defect of the pseudo-Poisson equation on the solving mesh.
    double defect = 0.0;
    /// Defect recomputed on a doubled mesh.
    double residual = 0.0;
    double truncation = 0.0;
    std::string method;
    std::size_t iterations = 0;
};

/// Stationary row of a stochastic matrix. Throws ConvergenceError when the
/// chain has several recurrent classes or power iteration stalls.
Vector invariant_measure(const Matrix& kernel, StationaryMethod method = StationaryMethod::automatic,
                         std::size_t max_iter = 1'000'000, std::size_t direct_limit = 2000);

/// max{rho K_lambda, M (1 + b K_lambda) / c}
double cost_bound(const PdmpModel& model, double rho);

/// Interior part of the Lyapunov function.
Vector interior_g(const PdmpModel& model);

/// sup_x |h(x)| / g(x)
double g_norm(const Vector& h, const Vector& g);

/// sup-norm of h + rho calL - cost - G h.
double poisson_defect(const PolicyTerms& terms, double rho, const Vector& h);

EvaluationResult evaluate_policy(const FlowDiscretization& disc, const FeedbackPolicy& policy,
                                 const EvaluationOptions& options = {});
EvaluationResult evaluate_policy(const PdmpModel& model, const FeedbackPolicy& policy,
                                 const EvaluationOptions& options = {},
                                 const DiscretizationOptions& mesh = {});

/// Pseudo-Poisson defect of (rho, h) with every quadrature on a mesh twice as fine as `mesh`.
double residual(const PdmpModel& model, const FeedbackPolicy& policy, const EvaluationResult& result,
                const DiscretizationOptions& mesh = {});

}  // namespace pdmp
