#include "pdmp/audit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pdmp {

namespace {

class ItemBuilder {
public:
    ItemBuilder(std::string id, std::string description, std::size_t states, double tol)
        : tol_(tol) {
        item_.id = std::move(id);
        item_.description = std::move(description);
        item_.state_slack.assign(states, kInfinity);
    }

    void record(std::size_t state, double slack, const std::string& where) {
        if (std::isnan(slack)) slack = -kInfinity;
        item_.state_slack[state] = std::min(item_.state_slack[state], slack);
        if (slack < item_.worst_slack) {
            item_.worst_slack = slack;
            item_.location = where;
        }
    }

    void undecided(const std::string& where) {
        if (undecided_.empty()) undecided_ = where;
    }

    AuditItem finish(std::string note = {}) {
        item_.note = std::move(note);
        if (item_.worst_slack < -tol_)
            item_.status = AuditStatus::fail;
        else if (!undecided_.empty()) {
            item_.status = AuditStatus::not_checkable;
            if (item_.note.empty()) item_.note = "limit behaviour undecidable on a truncated horizon at " + undecided_;
        }
        return std::move(item_);
    }

private:
    AuditItem item_;
    double tol_;
    std::string undecided_;
};

std::string at(double x) {
    std::ostringstream os;
    os.precision(10);
    os << "x=" << x;
    return os.str();
}

std::string at(double x, int a) { return at(x) + " a=" + std::to_string(a); }

std::vector<int> feasible_at(const PdmpModel& m, std::size_t node) {
    const std::size_t n = m.interior_size();
    return node < n ? m.actions.feasible[node] : m.actions.feasible_boundary[node - n];
}

// Copy of the model whose jump rate is the lower rate bound for every action
// and whose running cost is `cost` for every action.
PdmpModel lower_rate_model(const PdmpModel& m, const Vector& cost) {
    PdmpModel copy = m;
    for (Eigen::Index a = 0; a < copy.jump_rate.cols(); ++a) {
        copy.jump_rate.col(a) = m.rate_floor;
        copy.running_cost.col(a) = cost;
    }
    return copy;
}

}  // namespace

const char* to_string(AuditStatus status) {
    switch (status) {
        case AuditStatus::pass: return "pass";
        case AuditStatus::fail: return "fail";
        case AuditStatus::not_checkable: return "not_checkable";
    }
    return "?";
}

bool AuditReport::passed() const {
    return std::none_of(items.begin(), items.end(), [](const auto& i) { return i.status == AuditStatus::fail; });
}

const AuditItem* AuditReport::find(const std::string& id) const {
    for (const auto& i : items)
        if (i.id == id) return &i;
    return nullptr;
}

AuditReport audit_assumptions(const PdmpModel& m, const std::optional<FeedbackPolicy>& policy,
                              const AuditOptions& options) {
    if (policy) require_feasible(m, *policy);
    const auto& k = m.constants;
    const std::size_t n = m.interior_size(), nb = m.grid.boundary_size(), nodes = m.grid.node_count();
    const double tol = options.tol;
    const Flow flow = m.flow();
    const Vector g_int = interior_g(m);

    // node x action table of Q g
    Matrix qg(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(m.action_count()));
    for (std::size_t a = 0; a < m.action_count(); ++a) qg.col(static_cast<Eigen::Index>(a)) = m.kernel[a] * g_int;

    std::vector<std::size_t> order(nodes);
    for (std::size_t i = 0; i < nodes; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return m.grid.node(x) < m.grid.node(y); });
    std::vector<double> coords, gvals;
    for (auto i : order) {
        coords.push_back(m.grid.node(i));
        gvals.push_back(m.lyapunov_g(static_cast<Eigen::Index>(i)));
    }

    AuditReport report;

    {
        ItemBuilder item("expected_growth", "Xg + c g - lambda (g - Qg) <= b on interior states", n, tol);
        for (std::size_t x = 0; x < n; ++x) {
            const double y = m.grid.points[x];
            const double gx = g_int(static_cast<Eigen::Index>(x));
            const double xg = flow_derivative(flow, coords, gvals, y);
            for (int a : m.actions.feasible[x]) {
                const auto r = static_cast<Eigen::Index>(x);
                const double lhs = xg + k.c * gx - m.jump_rate(r, a) * (gx - qg(r, a));
                item.record(x, k.b - lhs, at(y, a));
            }
        }
        report.items.push_back(item.finish());
    }
    {
        ItemBuilder item("running_cost_growth", "f <= M g on all states", nodes, tol);
        for (std::size_t x = 0; x < nodes; ++x)
            for (int a : feasible_at(m, x)) {
                const auto r = static_cast<Eigen::Index>(x);
                item.record(x, k.M * m.lyapunov_g(r) - m.running_cost(r, a), at(m.grid.node(x), a));
            }
        report.items.push_back(item.finish());
    }
    {
        ItemBuilder item("boundary_lyapunov", "rbar + Qg <= g on boundary states", nb, tol);
        for (std::size_t z = 0; z < nb; ++z) {
            const auto node = static_cast<Eigen::Index>(m.grid.boundary_node(z));
            for (int a : m.actions.feasible_boundary[z])
                item.record(z, m.lyapunov_g(node) - m.lyapunov_rbar(static_cast<Eigen::Index>(z)) - qg(node, a),
                            at(m.grid.boundary_points[z], a));
        }
        report.items.push_back(item.finish());
    }
    {
        ItemBuilder item("boundary_cost_growth", "r <= M / (c + delta) rbar on boundary states", nb, tol);
        const double factor = k.M / (k.c + k.delta);
        for (std::size_t z = 0; z < nb; ++z)
            for (int a : m.actions.feasible_boundary[z])
                item.record(z, factor * m.lyapunov_rbar(static_cast<Eigen::Index>(z)) -
                                   m.boundary_cost(static_cast<Eigen::Index>(z), a),
                            at(m.grid.boundary_points[z], a));
        report.items.push_back(item.finish());
    }

    const FlowDiscretization disc(m, options.mesh);
    {
        ItemBuilder item("kernel_lyapunov", policy ? "G g <= k_g g + K_g under the policy"
                                                   : "G g <= k_g g + K_g for every feedback policy",
                         n, tol);
        Vector gg(static_cast<Eigen::Index>(n));
        if (policy) {
            gg = kernel_matrix(disc, *policy) * g_int;
        } else {
            for (const std::size_t i : disc.backward_order()) {
                const auto& cell = disc.cell(i);
                double best = -kInfinity;
                for (int a : m.actions.feasible[i]) {
                    const auto& mo = disc.moments(i, a);
                    double v = mo.mass_lo * qg(static_cast<Eigen::Index>(mo.lo), a);
                    if (mo.mass_hi != 0.0) v += mo.mass_hi * qg(static_cast<Eigen::Index>(mo.hi), a);
                    double after = 0.0;
                    if (cell.end == CellEnd::grid) {
                        after = gg(static_cast<Eigen::Index>(cell.next));
                    } else if (cell.end == CellEnd::boundary) {
                        after = -kInfinity;
                        const auto node = static_cast<Eigen::Index>(m.grid.boundary_node(cell.next));
                        for (int b : m.actions.feasible_boundary[cell.next]) after = std::max(after, qg(node, b));
                    }
                    if (mo.survival != 0.0) v += mo.survival * after;
                    best = std::max(best, v);
                }
                gg(static_cast<Eigen::Index>(i)) = best;
            }
        }
        for (std::size_t x = 0; x < n; ++x) {
            const auto r = static_cast<Eigen::Index>(x);
            item.record(x, k.k_g * g_int(r) + k.K_g - gg(r), at(m.grid.points[x]));
        }
        report.items.push_back(item.finish());
    }
    {
        ItemBuilder item("rate_lower_bound", "lambda >= lambda_floor on feasible pairs", nodes, tol);
        for (std::size_t x = 0; x < nodes; ++x)
            for (int a : feasible_at(m, x)) {
                const auto r = static_cast<Eigen::Index>(x);
                item.record(x, m.jump_rate(r, a) - m.rate_floor(r), at(m.grid.node(x), a));
            }
        report.items.push_back(item.finish());
    }

    // Chain terminus of every interior state: the open cell its flow ends in, if any.
    std::vector<std::optional<std::size_t>> terminus(n);
    for (const std::size_t i : disc.backward_order()) {
        const auto& cell = disc.cell(i);
        if (cell.end == CellEnd::open) terminus[i] = i;
        else if (cell.end == CellEnd::grid) terminus[i] = terminus[cell.next];
    }
    const FeedbackPolicy any = lowest_index_policy(m);
    Vector sup_f(static_cast<Eigen::Index>(nodes));
    for (std::size_t x = 0; x < nodes; ++x) {
        double best = 0.0;
        for (int a : feasible_at(m, x)) best = std::max(best, m.running_cost(static_cast<Eigen::Index>(x), a));
        sup_f(static_cast<Eigen::Index>(x)) = best;
    }
    const PdmpModel lower = lower_rate_model(m, sup_f);
    const FlowDiscretization lower_disc(lower, options.mesh);
    auto tail_rate = [&](std::size_t cell) {
        const auto& s = lower_disc.cell(cell).samples.back();
        return (1.0 - s.theta) * m.rate_floor(static_cast<Eigen::Index>(s.lo)) +
               s.theta * m.rate_floor(static_cast<Eigen::Index>(s.hi));
    };
    auto tail_g = [&](std::size_t cell) {
        const auto& s = lower_disc.cell(cell).samples.back();
        return (1.0 - s.theta) * m.lyapunov_g(static_cast<Eigen::Index>(s.lo)) +
               s.theta * m.lyapunov_g(static_cast<Eigen::Index>(s.hi));
    };
    {
        ItemBuilder item("sojourn_integral", "integral of exp(c t - Lambda_floor) up to t* <= K_lambda", n, tol);
        const Vector integral = policy_terms(lower_disc, any, -k.c).sojourn;
        for (std::size_t x = 0; x < n; ++x)
            item.record(x, k.K_lambda - integral(static_cast<Eigen::Index>(x)), at(m.grid.points[x]));
        report.items.push_back(item.finish());
    }
    {
        ItemBuilder item("survival_decay", "exp(c t - Lambda_floor) -> 0 when t* is infinite", n, tol);
        ItemBuilder lyap("lyapunov_decay", "exp(-Lambda_floor) g(phi) -> 0 when t* is infinite", n, tol);
        for (std::size_t x = 0; x < n; ++x) {
            if (!terminus[x]) continue;
            const std::size_t t = *terminus[x];
            if (!lower_disc.cell(t).frozen) {
                item.undecided(at(m.grid.points[x]));
                lyap.undecided(at(m.grid.points[x]));
                continue;
            }
            const double rate = tail_rate(t);
            item.record(x, rate > k.c ? 0.0 : -kInfinity, at(m.grid.points[x]));
            lyap.record(x, rate > 0.0 || tail_g(t) == 0.0 ? 0.0 : -kInfinity, at(m.grid.points[x]));
        }
        report.items.push_back(item.finish());
        report.items.push_back(lyap.finish());
    }
    {
        ItemBuilder item("lower_rate_cost_integral",
                         "integral of exp(-Lambda_floor) sup_a f up to t* is finite", n, tol);
        const Vector integral = policy_terms(lower_disc, any, 0.0).running;
        for (std::size_t x = 0; x < n; ++x) {
            const double v = integral(static_cast<Eigen::Index>(x));
            item.record(x, std::isfinite(v) ? 0.0 : -kInfinity, at(m.grid.points[x]));
        }
        report.items.push_back(item.finish());
    }
    if (policy) {
        ItemBuilder item("geometric_ergodicity", "||G^k h - nu(h)||_g <= a kappa^k ||h||_g with kappa < 1", 1, tol);
        const Matrix kernel = kernel_matrix(disc, *policy);
        try {
            const Vector nu = invariant_measure(kernel);
            report.ergodicity = estimate_ergodicity(kernel, nu, g_int);
            item.record(0, report.ergodicity->certified ? 1.0 - report.ergodicity->kappa : -kInfinity,
                        "kappa=" + std::to_string(report.ergodicity->kappa));
            report.items.push_back(item.finish());
        } catch (const ConvergenceError& e) {
            item.record(0, -kInfinity, "policy kernel");
            report.items.push_back(item.finish(e.what()));
        }
    }
    {
        AuditItem item;
        item.id = "discounted_cost_finiteness";
        item.description = "finiteness of the discounted value functions";
        item.status = AuditStatus::not_checkable;
        item.note = "no constructive test is available; the check is omitted";
        report.items.push_back(item);
    }
    return report;
}

}  // namespace pdmp
