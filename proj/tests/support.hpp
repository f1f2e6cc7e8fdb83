#pragma once

#include "pdmp/io.hpp"
#include "pdmp/pia.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace testing {

using nlohmann::json;
using Table = std::vector<std::vector<double>>;
using Rows = std::vector<std::vector<std::vector<double>>>;  // [state][action][target]

inline std::string model_path(const std::string& name) { return std::string(PDMP_MODELS_DIR) + "/" + name + ".json"; }

inline const std::vector<std::string>& bundled_names() {
    static const std::vector<std::string> names{"ctmdp_toy", "ctmdp_3state", "drift_boundary", "boundary_cycle",
                                                "decay_model"};
    return names;
}

inline pdmp::PdmpModel bundled(const std::string& name) { return pdmp::load_model(model_path(name)); }

/// Trivial-flow model document on states 0..n-1 with g = 1 and constants that
/// satisfy the growth conditions for rates bounded below by `floor`.
inline json pure_jump_doc(const Table& rates, const Rows& q, const Table& costs) {
    const std::size_t n = rates.size();
    double floor = rates[0][0], top = 0.0;
    for (const auto& row : rates)
        for (double r : row) floor = std::min(floor, r);
    for (const auto& row : costs)
        for (double f : row) top = std::max(top, f);
    std::vector<double> points;
    for (std::size_t i = 0; i < n; ++i) points.push_back(static_cast<double>(i));
    const double c = floor > 0.0 ? floor / 2.0 : 1.0;
    std::vector<double> actions;
    for (std::size_t a = 0; a < rates[0].size(); ++a) actions.push_back(static_cast<double>(a));
    return {
        {"schema", "pdmp-model/1"},
        {"name", "pure_jump"},
        {"grid", {{"points", points}, {"boundary_points", json::array()}}},
        {"actions", {{"values", actions}}},
        {"flow", {{"kind", "trivial"}}},
        {"rates", {{"lambda", rates}, {"lambda_floor", std::vector<double>(n, floor)}}},
        {"kernel", {{"Q", q}}},
        {"costs", {{"running", costs}, {"boundary", json::array()}}},
        {"lyapunov", {{"g", std::vector<double>(n, 1.0)}, {"rbar", json::array()}}},
        {"constants",
         {{"b", c}, {"c", c}, {"delta", 1.0}, {"M", top + 1.0}, {"K_lambda", floor > 0.0 ? 1.0 / (floor - c) + 0.01 : 1.0},
          {"k_g", 0.5}, {"K_g", 0.5}}},
    };
}

inline pdmp::PdmpModel pure_jump(const Table& rates, const Rows& q, const Table& costs) {
    return pdmp::parse_model(pure_jump_doc(rates, q, costs));
}

/// Unit drift on a uniform grid of [0, 1) with boundary {1}, one action,
/// constant jump rate `rate` and jumps to state 0; boundary cost r0, running cost f0.
inline json unit_drift_doc(std::size_t n, double rate, double f0, double r0) {
    std::vector<double> points, g;
    for (std::size_t j = 0; j < n; ++j) points.push_back(static_cast<double>(j) / static_cast<double>(n));
    std::vector<double> to_zero(n, 0.0);
    to_zero[0] = 1.0;
    json lambda = json::array(), running = json::array(), q = json::array();
    for (std::size_t k = 0; k <= n; ++k) {
        lambda.push_back({rate});
        running.push_back({f0});
        q.push_back({to_zero});
        g.push_back(1.0 + 2.0 * (k < n ? points[k] : 1.0));
    }
    return {
        {"schema", "pdmp-model/1"},
        {"name", "unit_drift"},
        {"grid", {{"points", points}, {"boundary_points", {1.0}}}},
        {"actions", {{"values", {0.0}}}},
        {"flow", {{"kind", "affine1d"}, {"alpha0", 1.0}, {"alpha1", 0.0}, {"domain", {0.0, 1.0}}}},
        {"rates", {{"lambda", lambda}, {"lambda_floor", std::vector<double>(n + 1, rate)}}},
        {"kernel", {{"Q", q}}},
        {"costs", {{"running", running}, {"boundary", {{r0}}}}},
        {"lyapunov", {{"g", g}, {"rbar", {1.0}}}},
        {"constants", {{"b", 5.0}, {"c", 1.0}, {"delta", 1.0}, {"M", std::max(4.0, 2.0 * r0 + f0)}, {"K_lambda", 2.0},
                       {"k_g", 0.5}, {"K_g", 1.0}}},
    };
}

inline pdmp::PdmpModel unit_drift(std::size_t n, double rate, double f0, double r0) {
    return pdmp::parse_model(unit_drift_doc(n, rate, f0, r0));
}

/// Continuous-time MDP solved by uniformization and relative value iteration.
struct CtmdpOracle {
    double rho = 0.0;
    std::vector<int> policy;
    /// Per state: smallest gap between the best and second-best action values.
    std::vector<double> action_gap;
};

inline CtmdpOracle ctmdp_oracle(const pdmp::PdmpModel& m) {
    const std::size_t n = m.interior_size();
    double top = 0.0;
    for (std::size_t x = 0; x < n; ++x)
        for (int a : m.actions.feasible[x]) top = std::max(top, m.jump_rate(static_cast<Eigen::Index>(x), a));
    const double big = 1.1 * top;
    // discrete chain: P(x, y) = lambda Q(x, y) / big, plus the self-loop remainder
    auto q_value = [&](std::size_t x, int a, const std::vector<double>& v) {
        const double lam = m.jump_rate(static_cast<Eigen::Index>(x), a);
        double s = (1.0 - lam / big) * v[x];
        for (std::size_t y = 0; y < n; ++y)
            s += lam / big * m.kernel[static_cast<std::size_t>(a)](static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) * v[y];
        return m.running_cost(static_cast<Eigen::Index>(x), a) / big + s;
    };
    std::vector<double> v(n, 0.0), next(n);
    double gain = 0.0;
    for (int it = 0; it < 1'000'000; ++it) {
        for (std::size_t x = 0; x < n; ++x) {
            double best = std::numeric_limits<double>::infinity();
            for (int a : m.actions.feasible[x]) best = std::min(best, q_value(x, a, v));
            next[x] = best;
        }
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t x = 0; x < n; ++x) {
            lo = std::min(lo, next[x] - v[x]);
            hi = std::max(hi, next[x] - v[x]);
        }
        gain = 0.5 * (lo + hi);
        const double ref = next[0];
        for (std::size_t x = 0; x < n; ++x) v[x] = next[x] - ref;
        if (hi - lo < 1e-13) break;
    }
    CtmdpOracle out;
    out.rho = big * gain;
    for (std::size_t x = 0; x < n; ++x) {
        std::vector<std::pair<double, int>> vals;
        for (int a : m.actions.feasible[x]) vals.push_back({q_value(x, a, v), a});
        std::sort(vals.begin(), vals.end());
        out.policy.push_back(vals.front().second);
        out.action_gap.push_back(vals.size() > 1 ? (vals[1].first - vals[0].first) * big : 1e300);
    }
    return out;
}

/// Random feasible policy drawn from a simple LCG stream.
inline pdmp::FeedbackPolicy random_policy(const pdmp::PdmpModel& m, std::uint64_t& state) {
    auto next = [&] {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        return state >> 33;
    };
    pdmp::FeedbackPolicy p;
    for (const auto& set : m.actions.feasible) p.interior.push_back(set[next() % set.size()]);
    for (const auto& set : m.actions.feasible_boundary) p.boundary.push_back(set[next() % set.size()]);
    return p;
}

}  // namespace testing
