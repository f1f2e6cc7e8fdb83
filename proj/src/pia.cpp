#include "pdmp/pia.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pdmp {

namespace {

struct Choice {
    int action = -1;
    double value = 0.0;
    double minimum = 0.0;
};

template <class Score>
Choice choose(const std::vector<int>& feasible, int prev, double tie_tol, Score&& score) {
    std::vector<double> values;
    double best = kInfinity;
    for (int a : feasible) {
        values.push_back(score(a));
        best = std::min(best, values.back());
    }
    const double slack = tie_tol * std::max(1.0, std::abs(best));
    Choice c;
    c.minimum = best;
    for (std::size_t k = 0; k < feasible.size(); ++k)
        if (feasible[k] == prev && values[k] <= best + slack) {
            c.action = prev;
            c.value = values[k];
            return c;
        }
    for (std::size_t k = 0; k < feasible.size(); ++k)
        if (values[k] <= best + slack) {
            c.action = feasible[k];
            c.value = values[k];
            return c;
        }
    c.action = feasible.front();  // every value is NaN
    c.value = values.front();
    return c;
}

}  // namespace

Improvement improve(const FlowDiscretization& disc, double rho, const Vector& h, const FeedbackPolicy& prev,
                    double tie_tol) {
    const auto& m = disc.model();
    const std::size_t n = m.interior_size(), nb = m.grid.boundary_size();
    Improvement out;
    out.policy = prev;
    out.minimum = Vector::Zero(static_cast<Eigen::Index>(n));
    out.value = Vector::Zero(static_cast<Eigen::Index>(n));

    std::vector<double> boundary_value(nb), boundary_min(nb);
    for (std::size_t z = 0; z < nb; ++z) {
        const std::size_t node = m.grid.boundary_node(z);
        const auto c = choose(m.actions.feasible_boundary[z], prev.boundary[z], tie_tol, [&](int a) {
            return m.boundary_cost(static_cast<Eigen::Index>(z), a) + kernel_apply(m, node, a, h);
        });
        out.policy.boundary[z] = c.action;
        boundary_value[z] = c.value;
        boundary_min[z] = c.minimum;
    }

    for (const std::size_t i : disc.backward_order()) {
        const auto& cell = disc.cell(i);
        double after_value = 0.0, after_min = 0.0;
        if (cell.end == CellEnd::grid) {
            after_value = out.value(static_cast<Eigen::Index>(cell.next));
            after_min = out.minimum(static_cast<Eigen::Index>(cell.next));
        } else if (cell.end == CellEnd::boundary) {
            after_value = boundary_value[cell.next];
            after_min = boundary_min[cell.next];
        }
        auto local = [&](int a) {
            const auto& mo = disc.moments(i, a);
            double v = mo.cost - rho * mo.sojourn + mo.mass_lo * kernel_apply(m, mo.lo, a, h);
            if (mo.mass_hi != 0.0) v += mo.mass_hi * kernel_apply(m, mo.hi, a, h);
            return std::pair{v, mo.survival};
        };
        const auto c = choose(m.actions.feasible[i], prev.interior[i], tie_tol, [&](int a) {
            const auto [v, s] = local(a);
            return s == 0.0 ? v : v + s * after_value;
        });
        double minimum = kInfinity;
        for (int a : m.actions.feasible[i]) {
            const auto [v, s] = local(a);
            minimum = std::min(minimum, s == 0.0 ? v : v + s * after_min);
        }
        out.policy.interior[i] = c.action;
        out.value(static_cast<Eigen::Index>(i)) = c.value;
        out.minimum(static_cast<Eigen::Index>(i)) = minimum;
    }
    return out;
}

FeedbackPolicy improve_policy(const FlowDiscretization& disc, double rho, const Vector& h,
                              const FeedbackPolicy& prev) {
    return improve(disc, rho, h, prev).policy;
}

Vector one_stage_value(const FlowDiscretization& disc, double rho, const Vector& h, const FeedbackPolicy& policy) {
    const PolicyTerms t = policy_terms(disc, policy);
    return -rho * t.sojourn + t.running + t.boundary + t.kernel * h;
}

double optimality_residual(const FlowDiscretization& disc, double rho, const Vector& h) {
    const auto imp = improve(disc, rho, h, lowest_index_policy(disc.model()));
    return (h - imp.minimum).cwiseAbs().maxCoeff();
}

const char* to_string(PiaStatus status) {
    switch (status) {
        case PiaStatus::converged: return "converged";
        case PiaStatus::max_iter: return "max-iter";
        case PiaStatus::cycling: return "cycling";
    }
    return "?";
}

PiaResult run_pia(const FlowDiscretization& disc, const FeedbackPolicy& u0, const PiaOptions& options) {
    const auto& m = disc.model();
    require_feasible(m, u0);
    const Vector g = interior_g(m);

    PiaResult best;
    bool have_best = false;
    FeedbackPolicy current = u0;
    std::set<std::pair<std::vector<int>, std::vector<int>>> visited;
    Vector prev_h;
    double prev_rho = kInfinity;

    for (std::size_t n = 0; n < options.max_iter; ++n) {
        visited.insert({current.interior, current.boundary});
        EvaluationResult eval = evaluate_policy(disc, current, options.evaluation);
        const auto imp = improve(disc, eval.rho, eval.h, current);

        PiaRecord rec;
        rec.n = n;
        rec.rho = eval.rho;
        rec.poisson_residual = eval.residual;
        rec.changed_states = count_changes(current, imp.policy);
        rec.optimality_residual = (eval.h - imp.minimum).cwiseAbs().maxCoeff();
        rec.h_change = prev_h.size() == eval.h.size() ? (eval.h - prev_h).cwiseAbs().maxCoeff() : kInfinity;
        rec.h_norm = g_norm(eval.h, g);

        const double drop = prev_rho - eval.rho;
        prev_rho = eval.rho;
        prev_h = eval.h;

        if (!have_best || eval.rho < best.evaluation.rho) {
            best.evaluation = eval;
            best.policy = current;
            have_best = true;
        }
        best.trace.records.push_back(rec);

        const bool settled = n > 0 && drop < options.tol_rho && rec.optimality_residual < 10.0 * options.tol_rho;
        if (imp.policy == current || settled) {
            best.evaluation = std::move(eval);
            best.policy = current;
            best.trace.status = PiaStatus::converged;
            best.trace.policy_fixed = imp.policy == current;
            return best;
        }
        if (visited.count({imp.policy.interior, imp.policy.boundary})) {
            best.trace.status = PiaStatus::cycling;
            return best;
        }
        current = imp.policy;
    }
    best.trace.status = PiaStatus::max_iter;
    return best;
}

PiaResult run_pia(const PdmpModel& model, const FeedbackPolicy& u0, const PiaOptions& options) {
    const FlowDiscretization disc(model, options.mesh);
    return run_pia(disc, u0, options);
}

}  // namespace pdmp
