#include "pdmp/evaluation.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <string>

namespace pdmp {

namespace {

// Weighted operator norm of G^k - 1 nu applied through probe functions, used
// on grids too large for the exact row sums.
double probe_norm(const Matrix& power, const Vector& nu, const Vector& g) {
    const auto n = power.rows();
    double best = 0.0;
    std::vector<Vector> probes{g, Vector::Ones(n), Vector::LinSpaced(n, 0.0, 1.0)};
    for (auto& h : probes) {
        h /= g_norm(h, g);
        const Vector d = power * h - Vector::Constant(n, nu.dot(h));
        best = std::max(best, g_norm(d, g));
    }
    return best;
}

double exact_norm(const Matrix& power, const Vector& nu, const Vector& g) {
    double best = 0.0;
    for (Eigen::Index x = 0; x < power.rows(); ++x) {
        double s = 0.0;
        for (Eigen::Index y = 0; y < power.cols(); ++y) s += std::abs(power(x, y) - nu(y)) * g(y);
        best = std::max(best, s / g(x));
    }
    return best;
}

Vector solve_direct(const Matrix& kernel) {
    const auto n = kernel.rows();
    const Matrix a = (Matrix::Identity(n, n) - kernel + Matrix::Ones(n, n)).transpose();
    Eigen::FullPivLU<Matrix> lu(a);
    lu.setThreshold(1e-11);
    if (!lu.isInvertible())
        throw ConvergenceError("kernel has more than one recurrent class (stationary measure not unique)");
    Vector nu = lu.solve(Vector::Ones(n));
    nu = nu.cwiseMax(0.0);
    return nu / nu.sum();
}

Vector solve_power(const Matrix& kernel, std::size_t max_iter) {
    const auto n = kernel.rows();
    const Matrix lazy_t = 0.5 * (Matrix::Identity(n, n) + kernel).transpose();
    const Matrix kernel_t = kernel.transpose();
    Vector nu = Vector::Constant(n, 1.0 / static_cast<double>(n));
    double prev_step = kInfinity, ratio = -1.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
        if ((kernel_t * nu - nu).lpNorm<1>() <= 1e-12) return nu / nu.sum();
        Vector next = lazy_t * nu;
        next /= next.sum();
        const double step = (next - nu).lpNorm<1>();
        if (prev_step > 0.0 && std::isfinite(prev_step)) ratio = step / prev_step;
        prev_step = step;
        nu = std::move(next);
    }
    // the lazy chain's modulus r relates to the kernel's by r = |1 + mu| / 2
    const double modulus = ratio < 0.0 ? -1.0 : std::clamp(2.0 * ratio - 1.0, 0.0, 1.0);
    throw ConvergenceError("power iteration for the stationary measure did not converge in " +
                               std::to_string(max_iter) + " iterations",
                           modulus);
}

Vector solve_deflated(const Matrix& kernel, const Vector& nu, const Vector& w) {
    const auto n = kernel.rows();
    const Matrix a = Matrix::Identity(n, n) - kernel + Vector::Ones(n) * nu.transpose();
    Eigen::PartialPivLU<Matrix> lu(a);
    if (!(lu.rcond() > 1e-14))
        throw SingularSystemError("deflated Poisson system is numerically singular (rcond " +
                                  std::to_string(lu.rcond()) + ")");
    return lu.solve(w);
}

}  // namespace

const char* to_string(PoissonMethod method) {
    return method == PoissonMethod::direct ? "direct" : "neumann";
}

ErgodicityEstimate estimate_ergodicity(const Matrix& kernel, const Vector& nu, const Vector& g, int depth) {
    ErgodicityEstimate est;
    const auto n = kernel.rows();
    const bool exact = n <= 512;
    Matrix power = Matrix::Identity(n, n);
    for (int k = 0; k <= depth; ++k) {
        est.decay.push_back(exact ? exact_norm(power, nu, g) : probe_norm(power, nu, g));
        power = power * kernel;
    }
    const double floor = 1e-13 * std::max(est.decay.front(), 1e-300);
    int last = 0;
    for (int k = 0; k <= depth; ++k)
        if (est.decay[static_cast<std::size_t>(k)] > floor) last = k;
    if (last == 0) {
        est.kappa = 1e-3;
    } else {
        const int first = last / 2;
        const double ratio = est.decay[static_cast<std::size_t>(last)] / est.decay[static_cast<std::size_t>(first)];
        est.kappa = std::pow(ratio, 1.0 / (last - first));
    }
    est.kappa = std::clamp(est.kappa, 1e-3, 1.0);
    est.a = 0.0;
    for (int k = 0; k <= last; ++k)
        est.a = std::max(est.a, est.decay[static_cast<std::size_t>(k)] / std::pow(est.kappa, k));
    est.certified = est.kappa < 1.0 - 1e-9;
    return est;
}

Vector invariant_measure(const Matrix& kernel, StationaryMethod method, std::size_t max_iter,
                         std::size_t direct_limit) {
    const auto n = kernel.rows();
    if (n == 0 || kernel.cols() != n) throw Error("kernel must be a non-empty square matrix");
    const double drift = (kernel.rowwise().sum() - Vector::Ones(n)).cwiseAbs().maxCoeff();
    if (drift > 1e-6) throw Error("kernel rows do not sum to one (off by " + std::to_string(drift) + ")");
    if (method == StationaryMethod::automatic)
        method = static_cast<std::size_t>(n) <= direct_limit ? StationaryMethod::direct : StationaryMethod::power;
    return method == StationaryMethod::direct ? solve_direct(kernel) : solve_power(kernel, max_iter);
}

double cost_bound(const PdmpModel& model, double rho) {
    const auto& k = model.constants;
    return std::max(rho * k.K_lambda, k.M * (1.0 + k.b * k.K_lambda) / k.c);
}

Vector interior_g(const PdmpModel& model) {
    return model.lyapunov_g.head(static_cast<Eigen::Index>(model.interior_size()));
}

double g_norm(const Vector& h, const Vector& g) { return h.cwiseQuotient(g).cwiseAbs().maxCoeff(); }

double poisson_defect(const PolicyTerms& terms, double rho, const Vector& h) {
    const Vector cost = terms.running + terms.boundary;
    return (h + rho * terms.sojourn - cost - terms.kernel * h).cwiseAbs().maxCoeff();
}

EvaluationResult evaluate_policy(const FlowDiscretization& disc, const FeedbackPolicy& policy,
                                 const EvaluationOptions& options) {
    const auto& model = disc.model();
    const PolicyTerms terms = policy_terms(disc, policy);
    EvaluationResult r;
    r.truncation = terms.truncation;
    r.nu = invariant_measure(terms.kernel, options.stationary, options.max_iter, options.direct_limit);
    r.sojourn = terms.sojourn;
    r.cost = terms.running + terms.boundary;
    r.D = r.nu.dot(r.sojourn);
    if (!(r.D > 0.0)) throw Error("mean sojourn under the stationary measure is not positive");
    r.rho = r.nu.dot(r.cost) / r.D;
    r.w = r.cost - r.rho * r.sojourn;
    r.method = to_string(options.method);

    const auto n = terms.kernel.rows();
    if (options.method == PoissonMethod::direct) {
        r.h = solve_deflated(terms.kernel, r.nu, r.w);
        r.iterations = 1;
    } else {
        const Vector g = interior_g(model);
        const auto erg = estimate_ergodicity(terms.kernel, r.nu, g);
        if (!erg.certified)
            throw ConvergenceError("series evaluation needs a certified contraction rate; estimated kappa = " +
                                       std::to_string(erg.kappa),
                                   erg.kappa);
        Vector h = options.neumann_seed.size() == n ? options.neumann_seed : Vector::Zero(n);
        const double scale = std::max(cost_bound(model, r.rho), g_norm(r.w, g)) * g.maxCoeff() /
                             (1.0 - erg.kappa);
        const double target = 0.1 * options.tol;
        double bound = erg.a * scale;
        bool done = false;
        for (std::size_t k = 0; k < options.max_iter; ++k) {
            Vector next = r.w + terms.kernel * h;
            const double step = (next - h).cwiseAbs().maxCoeff();
            h = std::move(next);
            bound *= erg.kappa;
            r.iterations = k + 1;
            if (bound < target && step < target * (1.0 - erg.kappa)) {
                done = true;
                break;
            }
        }
        if (!done)
            throw ConvergenceError("Neumann series did not reach tolerance in " +
                                       std::to_string(options.max_iter) + " terms",
                                   erg.kappa);
        r.h = std::move(h);
    }
    r.h.array() -= r.nu.dot(r.h);
    r.defect = poisson_defect(terms, r.rho, r.h);
    if (!(r.defect <= options.tol))
        throw ConvergenceError("pseudo-Poisson defect " + std::to_string(r.defect) + " exceeds tolerance");
    r.residual = options.skip_residual ? r.defect : residual(model, policy, r, disc.options());
    return r;
}

EvaluationResult evaluate_policy(const PdmpModel& model, const FeedbackPolicy& policy,
                                 const EvaluationOptions& options, const DiscretizationOptions& mesh) {
    const FlowDiscretization disc(model, mesh);
    return evaluate_policy(disc, policy, options);
}

double residual(const PdmpModel& model, const FeedbackPolicy& policy, const EvaluationResult& result,
                const DiscretizationOptions& mesh) {
    const FlowDiscretization fine(model, mesh.refined(2));
    return poisson_defect(policy_terms(fine, policy), result.rho, result.h);
}

}  // namespace pdmp
