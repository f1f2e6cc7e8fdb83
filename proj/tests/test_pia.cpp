#include "support.hpp"

#include <doctest.h>

using namespace pdmp;
using namespace testing;

TEST_CASE("single action converges after one evaluation") {
    const auto m = unit_drift(16, 0.7, 1.0, 2.0);
    const auto r = run_pia(m, lowest_index_policy(m));
    CHECK(r.trace.status == PiaStatus::converged);
    CHECK(r.trace.policy_fixed);
    REQUIRE(r.trace.records.size() == 1);
    CHECK(r.trace.records[0].changed_states == 0);
    CHECK(r.trace.records[0].optimality_residual <= 1e-10);
}

TEST_CASE("dominated action is chosen everywhere") {
    const auto m = bundled("ctmdp_toy");
    const FlowDiscretization d(m);
    const auto start = lowest_index_policy(m);
    const auto e = evaluate_policy(d, start);
    // action 1 saves f0 - f1 = 2 per unit time at equal rates
    const double gap = std::max(2.0 / 1.0, 2.0 / 2.0);
    CHECK(optimality_residual(d, e.rho, e.h) == doctest::Approx(gap).epsilon(1e-10));

    const auto r = run_pia(d, start);
    CHECK(r.trace.status == PiaStatus::converged);
    for (int a : r.policy.interior) CHECK(a == 1);
    CHECK(r.trace.records.size() == 2);
    CHECK(r.trace.records[0].changed_states == 2);
}

TEST_CASE("policy iteration matches relative value iteration on pure jump models") {
    for (const auto& name : {"ctmdp_toy", "ctmdp_3state"}) {
        CAPTURE(name);
        const auto m = bundled(name);
        const auto oracle = ctmdp_oracle(m);
        const auto r = run_pia(m, lowest_index_policy(m));
        CHECK(r.trace.status == PiaStatus::converged);
        CHECK(r.evaluation.rho == doctest::Approx(oracle.rho).epsilon(1e-10));
        for (std::size_t x = 0; x < m.interior_size(); ++x)
            if (oracle.action_gap[x] > 1e-8) CHECK(r.policy.interior[x] == oracle.policy[x]);
    }
}

TEST_CASE("random pure jump models") {
    std::uint64_t s = 41;
    auto u = [&] {
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<double>(s >> 11) * 0x1.0p-53;
    };
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(trial % 4), na = 2 + static_cast<std::size_t>(trial % 2);
        Table rates(n, std::vector<double>(na)), costs(n, std::vector<double>(na));
        Rows q(n, std::vector<std::vector<double>>(na, std::vector<double>(n)));
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t a = 0; a < na; ++a) {
                rates[x][a] = 0.5 + 2.0 * u();
                costs[x][a] = 5.0 * u();
                double sum = 0.0;
                for (auto& v : q[x][a]) sum += (v = u() + 0.05);
                for (auto& v : q[x][a]) v /= sum;
            }
        const auto m = pure_jump(rates, q, costs);
        const auto oracle = ctmdp_oracle(m);
        const auto r = run_pia(m, lowest_index_policy(m));
        CAPTURE(trial);
        CHECK(r.trace.status == PiaStatus::converged);
        CHECK(r.evaluation.rho == doctest::Approx(oracle.rho).epsilon(1e-9));
    }
}

TEST_CASE("trace invariants on bundled models") {
    for (const auto& name : bundled_names()) {
        CAPTURE(name);
        const auto m = bundled(name);
        const FlowDiscretization d(m);
        std::uint64_t s = 77;
        for (int trial = 0; trial < 3; ++trial) {
            const auto start = trial == 0 ? lowest_index_policy(m) : random_policy(m, s);
            const auto r = run_pia(d, start);
            CHECK(r.trace.status == PiaStatus::converged);
            const auto& rec = r.trace.records;
            REQUIRE_FALSE(rec.empty());
            for (std::size_t k = 1; k < rec.size(); ++k) {
                CHECK(rec[k].n == k);
                CHECK(rec[k].rho <= rec[k - 1].rho + 1e-10 * std::max(1.0, std::abs(rec[k - 1].rho)));
            }
            for (const auto& record : rec) CHECK(record.poisson_residual <= 1e-8);
            CHECK(rec.back().optimality_residual <= 1e-7);
            // the improvement step keeps the final policy
            CHECK(improve_policy(d, r.evaluation.rho, r.evaluation.h, r.policy) == r.policy);
            // one-stage value under the final policy reproduces h
            const Vector v = one_stage_value(d, r.evaluation.rho, r.evaluation.h, r.policy);
            CHECK((v - r.evaluation.h).cwiseAbs().maxCoeff() <= 1e-8);
        }
    }
}

TEST_CASE("optimal cost is not beaten by sampled policies") {
    for (const auto& name : bundled_names()) {
        CAPTURE(name);
        const auto m = bundled(name);
        const FlowDiscretization d(m);
        const double best = run_pia(d, lowest_index_policy(m)).evaluation.rho;
        std::uint64_t s = 1234;
        for (int trial = 0; trial < 20; ++trial)
            CHECK(evaluate_policy(d, random_policy(m, s)).rho >= best - 1e-9 * std::max(1.0, std::abs(best)));
    }
}

TEST_CASE("improvement minimum is below every single-policy value") {
    const auto m = bundled("drift_boundary");
    const FlowDiscretization d(m);
    const auto e = evaluate_policy(d, lowest_index_policy(m));
    const auto imp = improve(d, e.rho, e.h, lowest_index_policy(m));
    CHECK((imp.value - imp.minimum).cwiseAbs().maxCoeff() <= 1e-12);
    std::uint64_t s = 8;
    for (int trial = 0; trial < 10; ++trial) {
        const Vector v = one_stage_value(d, e.rho, e.h, random_policy(m, s));
        CHECK(((v - imp.minimum).array() >= -1e-12).all());
    }
}

TEST_CASE("iteration budget") {
    const auto m = bundled("drift_boundary");
    PiaOptions opt;
    opt.max_iter = 1;
    const auto r = run_pia(m, lowest_index_policy(m), opt);
    CHECK(r.trace.status == PiaStatus::max_iter);
    CHECK(r.trace.records.size() == 1);
}
