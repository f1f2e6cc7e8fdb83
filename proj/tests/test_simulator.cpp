#include "support.hpp"

#include "pdmp/simulator.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace pdmp;
using namespace testing;

namespace {

// One-sample Kolmogorov-Smirnov statistic against a continuous cdf.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf&& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(a.size()) -
                                 static_cast<double>(j) / static_cast<double>(b.size())));
    }
    return d;
}

}  // namespace

TEST_CASE("uniform draws are in the open unit interval and keyed by their counters") {
    double sum = 0.0, lo = 1.0, hi = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = uniform01(1, 2, static_cast<std::uint64_t>(i), 0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
    CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(uniform01(5, 1, 2, 3) == uniform01(5, 1, 2, 3));
    CHECK(uniform01(5, 1, 2, 3) != uniform01(5, 1, 2, 4));
    CHECK(uniform01(5, 1, 2, 3) != uniform01(6, 1, 2, 3));
}

TEST_CASE("constant-rate sojourns are exponential") {
    const double lam = 1.7;
    const auto m = pure_jump({{lam}, {lam}}, {{{0.0, 1.0}}, {{1.0, 0.0}}}, {{1.0}, {1.0}});
    const FlowDiscretization d(m);
    const Simulator sim(d, lowest_index_policy(m));
    std::vector<double> inv, thin;
    const std::size_t n = 4000;
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = uniform01(9, 0, i, 0);
        const auto s = sim.sample_sojourn(0.0, xi);
        CHECK_FALSE(s.hit_boundary);
        CHECK(s.time == doctest::Approx(-std::log1p(-xi) / lam).epsilon(1e-12));
        inv.push_back(s.time);
        thin.push_back(sim.sample_sojourn_thinning(1.0, 9, i).time);
    }
    auto cdf = [&](double t) { return 1.0 - std::exp(-lam * t); };
    const double crit = 1.63 / std::sqrt(static_cast<double>(n));
    CHECK(ks_statistic(inv, cdf) < crit);
    CHECK(ks_statistic(thin, cdf) < crit);
}

TEST_CASE("deterministic sojourn to the boundary") {
    const auto m = unit_drift(8, 0.0, 1.0, 2.0);
    const FlowDiscretization d(m);
    const Simulator sim(d, lowest_index_policy(m));
    for (double xi : {0.01, 0.5, 0.99}) {
        const auto s = sim.sample_sojourn(0.25, xi);
        CHECK(s.hit_boundary);
        CHECK(s.time == doctest::Approx(0.75).epsilon(1e-14));
    }
}

TEST_CASE("sojourn law on a state-dependent rate matches the survival function") {
    const auto m = bundled("drift_boundary");
    const FlowDiscretization d(m);
    const auto pol = lowest_index_policy(m);
    const Simulator sim(d, pol);
    SimulationOptions topt;
    topt.thinning = true;
    const Simulator thin_sim(d, pol, topt);
    const double x = 0.3;
    const auto path = build_path(d, pol, x);
    const double tstar = path.hit_time();
    const std::size_t n = 4000;
    std::vector<double> inv, inner, thin;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = sim.sample_sojourn(x, uniform01(21, 0, i, 0));
        inv.push_back(s.time);
        if (s.hit_boundary) {
            ++hits;
            CHECK(s.time == doctest::Approx(tstar).epsilon(1e-12));
        } else {
            inner.push_back(s.time);
        }
        thin.push_back(thin_sim.sample_sojourn_thinning(x, 21, i).time);
    }
    const double p_hit = std::exp(-cum_rate(m, path, tstar));
    CHECK(std::abs(static_cast<double>(hits) / n - p_hit) < 4.0 * std::sqrt(p_hit * (1 - p_hit) / n));
    // law of the sojourn given no boundary hit
    auto cdf = [&](double t) { return (1.0 - std::exp(-cum_rate(m, path, t))) / (1.0 - p_hit); };
    CHECK(ks_statistic(inner, cdf) < 1.63 / std::sqrt(static_cast<double>(inner.size())));
    CHECK(ks_two_sample(inv, thin) < 1.63 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("boundary hits and costs on a deterministic cycle") {
    const double f0 = 1.5, r0 = 2.0;
    const auto m = unit_drift(8, 0.0, f0, r0);
    const FlowDiscretization d(m);
    SimulationOptions opt;
    opt.record_events = true;
    const Simulator sim(d, lowest_index_policy(m), opt);
    const auto [rec, sum] = sim.simulate(0.0, 10.5, 1);
    CHECK(rec.boundary_hits == 10);
    CHECK(rec.jumps == 10);
    CHECK(rec.running_cost == doctest::Approx(f0 * 10.5).epsilon(1e-12));
    CHECK(rec.boundary_cost == doctest::Approx(r0 * 10).epsilon(1e-12));
    CHECK(sum.average == doctest::Approx((f0 * 10.5 + r0 * 10) / 10.5).epsilon(1e-12));
    for (std::size_t k = 0; k < rec.jump_times.size(); ++k) {
        CHECK(rec.jump_times[k] == doctest::Approx(static_cast<double>(k + 1)).epsilon(1e-12));
        CHECK(rec.post_jump_states[k] == 0.0);
        CHECK(rec.boundary_hit[k]);
    }
    REQUIRE_FALSE(rec.events.empty());
    CHECK(rec.events.back().type == EventType::end);
    CHECK(rec.events.back().t == doctest::Approx(10.5));
}

TEST_CASE("constant running cost averages to the constant") {
    const auto m = pure_jump({{1.0}, {3.0}, {0.5}}, {{{0, 0.5, 0.5}}, {{0.2, 0, 0.8}}, {{1, 0, 0}}},
                             {{2.5}, {2.5}, {2.5}});
    const FlowDiscretization d(m);
    const Simulator sim(d, lowest_index_policy(m));
    const auto [rec, sum] = sim.simulate(0.0, 500.0, 3);
    CHECK(sum.average == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(rec.boundary_hits == 0);
}

TEST_CASE("trajectory bookkeeping") {
    const auto m = bundled("drift_boundary");
    const FlowDiscretization d(m);
    std::uint64_t s = 4;
    const Simulator sim(d, random_policy(m, s));
    const double horizon = 2000.0;
    const auto [rec, sum] = sim.simulate(0.0, horizon, 11);
    CHECK(rec.final_time == horizon);
    CHECK(rec.jumps == rec.jump_times.size());
    CHECK(std::is_sorted(rec.jump_times.begin(), rec.jump_times.end()));
    CHECK(rec.jump_times.back() <= horizon);
    const auto hits = static_cast<std::size_t>(std::count(rec.boundary_hit.begin(), rec.boundary_hit.end(), 1));
    CHECK(hits == rec.boundary_hits);
    for (double y : rec.post_jump_states) CHECK_UNARY(y >= 0.0 && y < 1.0);
    // jumps from the rate are Poisson-dominated by sup lambda, boundary jumps by the hit count
    const double top = m.jump_rate.maxCoeff() * horizon;
    CHECK(static_cast<double>(rec.jumps - rec.boundary_hits) <= top + 5.0 * std::sqrt(top));
    CHECK(sum.batch_means.size() == 20);
    CHECK(sum.average == doctest::Approx((rec.running_cost + rec.boundary_cost) / horizon).epsilon(1e-12));
}

TEST_CASE("simulation is reproducible") {
    const auto m = bundled("drift_boundary");
    const FlowDiscretization d(m);
    const Simulator sim(d, lowest_index_policy(m));
    const auto a = sim.simulate(0.0, 300.0, 5, 2).first;
    const auto b = sim.simulate(0.0, 300.0, 5, 2).first;
    const auto c = sim.simulate(0.0, 300.0, 5, 3).first;
    CHECK(a.jump_times == b.jump_times);
    CHECK(a.post_jump_states == b.post_jump_states);
    CHECK(a.running_cost == b.running_cost);
    CHECK(a.jump_times != c.jump_times);

    SimulationOptions one, four;
    one.threads = 1;
    four.threads = 4;
    const auto v1 = mc_validate(Simulator(d, lowest_index_policy(m), one), 0.0, 0.0, 200.0, 8, 5);
    const auto v4 = mc_validate(Simulator(d, lowest_index_policy(m), four), 0.0, 0.0, 200.0, 8, 5);
    CHECK(v1.replication_means == v4.replication_means);
}

TEST_CASE("validation verdict against the computed cost") {
    for (const auto& name : {"ctmdp_toy", "drift_boundary", "decay_model"}) {
        CAPTURE(name);
        const auto m = bundled(name);
        const FlowDiscretization d(m);
        const auto r = run_pia(d, lowest_index_policy(m));
        const Simulator sim(d, r.policy);
        const double horizon = 2000.0;
        const auto ok = mc_validate(sim, r.evaluation.rho, m.grid.points[0], horizon, 16, 7,
                                    transient_allowance(r.evaluation, horizon));
        CHECK(ok.pass);
        CHECK(ok.replication_means.size() == 16);
        const double off = r.evaluation.rho + 10.0 * ok.std_error + ok.allowance;
        CHECK_FALSE(mc_validate(sim, off, m.grid.points[0], horizon, 16, 7,
                                transient_allowance(r.evaluation, horizon))
                        .pass);
    }
}

TEST_CASE("renewal drift simulated mean") {
    const double lam = 0.7, f0 = 1.5, r0 = 2.0;
    const auto m = unit_drift(16, lam, f0, r0);
    const FlowDiscretization d(m);
    const Simulator sim(d, lowest_index_policy(m));
    const double rho = f0 + r0 * lam * std::exp(-lam) / (1.0 - std::exp(-lam));
    const auto v = mc_validate(sim, rho, 0.0, 5000.0, 16, 13);
    CHECK(v.pass);
    CHECK(v.std_error > 0.0);
}

TEST_CASE("explosion guard") {
    const auto m = bundled("ctmdp_3state");
    const FlowDiscretization d(m);
    SimulationOptions opt;
    opt.max_jumps = 100;
    const Simulator sim(d, lowest_index_policy(m), opt);
    CHECK_THROWS_AS(sim.simulate(0.0, 1e4, 1), SimulationAbort);
}
