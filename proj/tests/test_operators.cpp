#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace pdmp;
using namespace testing;

namespace {

// Unit drift model with lambda(y) = l0 + l1 y and f(y) = f0 + f1 y on a uniform grid of [0, 1).
PdmpModel linear_drift(std::size_t n, double l0, double l1, double f0, double f1, double r0) {
    auto doc = unit_drift_doc(n, l0, f0, r0);
    for (std::size_t k = 0; k <= n; ++k) {
        const double y = k < n ? static_cast<double>(k) / static_cast<double>(n) : 1.0;
        doc["rates"]["lambda"][k] = {l0 + l1 * y};
        doc["costs"]["running"][k] = {f0 + f1 * y};
    }
    doc["rates"]["lambda_floor"] = std::vector<double>(n + 1, l0);
    return parse_model(doc);
}

// Composite Simpson with many panels, used as an independent reference.
template <class F>
double simpson(F&& f, double a, double b, int panels = 20000) {
    const double h = (b - a) / (2 * panels);
    double s = f(a) + f(b);
    for (int i = 1; i < 2 * panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

Matrix constant_table(const PdmpModel& m, std::size_t rows, double v) {
    return Matrix::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m.action_count()), v);
}

}  // namespace

TEST_CASE("cumulative rate") {
    const auto flat = pure_jump({{2.0}, {2.0}}, {{{0.0, 1.0}}, {{1.0, 0.0}}}, {{1.0}, {1.0}});
    const FlowDiscretization d(flat);
    const auto p = build_path(d, lowest_index_policy(flat), 0.0);
    CHECK(cum_rate(flat, p, 0.0) == 0.0);
    CHECK(cum_rate(flat, p, 3.0) == doctest::Approx(6.0).epsilon(1e-12));

    const auto ramp = linear_drift(16, 0.0, 1.0, 0.0, 0.0, 1.0);
    const FlowDiscretization dr(ramp);
    const auto pr = build_path(dr, lowest_index_policy(ramp), 0.0);
    CHECK(cum_rate(ramp, pr, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    double prev = 0.0;
    for (double t = 0.05; t <= 1.0; t += 0.05) {
        const double v = cum_rate(ramp, pr, t);
        CHECK(v >= prev);
        prev = v;
    }
    CHECK_THROWS_AS(cum_rate(ramp, pr, 1.5), FlowError);
}

TEST_CASE("operators on a trivial flow with constant rate") {
    const double lam = 1.7;
    const auto m = pure_jump({{lam}, {lam}}, {{{0.0, 1.0}}, {{0.0, 1.0}}}, {{1.0}, {1.0}});
    const FlowDiscretization d(m);
    const auto p = build_path(d, lowest_index_policy(m), 0.0);
    for (double alpha : {0.0, 0.3, 2.0}) {
        CHECK(op_calL(m, alpha, p) == doctest::Approx(1.0 / (alpha + lam)).epsilon(1e-12));
        CHECK(op_L(m, alpha, constant_table(m, 2, 0.0), p) == 0.0);
    }
    CHECK(op_H(m, 0.0, Matrix::Zero(0, 1), p) == 0.0);
    Vector h(2);
    h << 5.0, -3.0;
    // Q is a point mass at state 1
    CHECK(op_G(m, 0.0, h, p) == doctest::Approx(-3.0).epsilon(1e-14));
    CHECK(op_G(m, 0.0, Vector::Zero(2), p) == 0.0);
}

TEST_CASE("operators along a unit drift without jumps") {
    const auto m = linear_drift(8, 0.0, 0.0, 1.0, 0.0, 3.0);
    const FlowDiscretization d(m);
    const auto pol = lowest_index_policy(m);
    const auto p = build_path(d, pol, 0.25);
    CHECK(p.hit_time() == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(op_L(m, 0.0, constant_table(m, 9, 1.0), p) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(op_calL(m, 0.0, build_path(d, pol, 0.5)) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(op_H(m, 0.0, Matrix::Constant(1, 1, 3.0), p) == doctest::Approx(3.0).epsilon(1e-14));

    const auto m1 = linear_drift(8, 1.0, 0.0, 1.0, 0.0, 3.0);
    const FlowDiscretization d1(m1);
    CHECK(op_H(m1, 0.0, Matrix::Constant(1, 1, 3.0), build_path(d1, pol, 0.25)) ==
          doctest::Approx(3.0 * std::exp(-0.75)).epsilon(1e-10));
}

TEST_CASE("quadrature matches an independent reference on a state-dependent rate") {
    // lambda(y) = 0.5 + y, f(y) = 1 + 2y, unit drift from 0: Lambda(t) = 0.5 t + t^2 / 2
    const auto m = linear_drift(16, 0.5, 1.0, 1.0, 2.0, 1.0);
    const FlowDiscretization d(m);
    const auto p = build_path(d, lowest_index_policy(m), 0.0);
    auto surv = [](double alpha, double t) { return std::exp(-alpha * t - 0.5 * t - 0.5 * t * t); };
    for (double alpha : {0.0, 0.4, -0.5}) {
        CAPTURE(alpha);
        const double calL = simpson([&](double t) { return surv(alpha, t); }, 0.0, 1.0);
        const double lf = simpson([&](double t) { return surv(alpha, t) * (1.0 + 2.0 * t); }, 0.0, 1.0);
        CHECK(op_calL(m, alpha, p) == doctest::Approx(calL).epsilon(1e-9));
        CHECK(op_L(m, alpha, m.running_cost, p) == doctest::Approx(lf).epsilon(1e-9));
        CHECK(op_H(m, alpha, Matrix::Constant(1, 1, 1.0), p) == doctest::Approx(surv(alpha, 1.0)).epsilon(1e-9));
    }
}

TEST_CASE("kernel of the swap chain is the anti-diagonal") {
    const auto m = pure_jump({{1.0}, {1.0}}, {{{0.0, 1.0}}, {{1.0, 0.0}}}, {{1.0}, {1.0}});
    const Matrix g = kernel_matrix(m, lowest_index_policy(m));
    Matrix anti(2, 2);
    anti << 0.0, 1.0, 1.0, 0.0;
    CHECK((g - anti).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("mass identity, damping and bounds on bundled models") {
    for (const auto& name : bundled_names()) {
        CAPTURE(name);
        const auto m = bundled(name);
        const FlowDiscretization d(m);
        const auto& k = m.constants;
        const Vector g = interior_g(m);
        std::uint64_t seed = 11;
        for (int trial = 0; trial < 5; ++trial) {
            const auto pol = trial == 0 ? lowest_index_policy(m) : random_policy(m, seed);
            const auto t0 = policy_terms(d, pol, 0.0);
            CHECK((t0.kernel.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
            CHECK(t0.kernel.minCoeff() >= 0.0);
            const Matrix gc = kernel_matrix(d, pol, k.c);
            CHECK(gc.rowwise().sum().maxCoeff() <= 1.0 + 1e-12);
            CHECK(t0.sojourn.minCoeff() > 0.0);
            CHECK(t0.sojourn.maxCoeff() <= k.K_lambda);
            CHECK(policy_terms(d, pol, -k.c).sojourn.maxCoeff() <= k.K_lambda);
            const Vector cost = t0.running + t0.boundary;
            CHECK(cost.minCoeff() >= 0.0);
            const double bound = k.M * (1.0 + k.b * k.K_lambda) / k.c;
            CHECK(((bound * g - cost).array() >= -1e-12).all());
        }
    }
}

TEST_CASE("path operators agree with the per-cell recursion") {
    for (const auto& name : bundled_names()) {
        CAPTURE(name);
        const auto m = bundled(name);
        const FlowDiscretization d(m);
        std::uint64_t seed = 5;
        const auto pol = random_policy(m, seed);
        for (double alpha : {0.0, 0.2}) {
            const auto t = policy_terms(d, pol, alpha);
            Vector h = Vector::LinSpaced(static_cast<Eigen::Index>(m.interior_size()), -1.0, 2.0);
            for (std::size_t x = 0; x < m.interior_size(); x += 7) {
                const auto p = build_path(d, pol, m.grid.points[x]);
                const auto r = static_cast<Eigen::Index>(x);
                CHECK(op_calL(m, alpha, p) == doctest::Approx(t.sojourn(r)).epsilon(1e-12));
                CHECK(op_L(m, alpha, m.running_cost, p) + op_H(m, alpha, m.boundary_cost, p) ==
                      doctest::Approx(t.running(r) + t.boundary(r)).epsilon(1e-12));
                CHECK(op_G(m, alpha, h, p) == doctest::Approx(t.kernel.row(r).dot(h)).epsilon(1e-12));
                CHECK((kernel_row(m, alpha, p).transpose() - t.kernel.row(r)).cwiseAbs().maxCoeff() <= 1e-12);
            }
        }
    }
}

TEST_CASE("mass identity from states between grid points") {
    for (const auto& name : {"drift_boundary", "decay_model"}) {
        CAPTURE(name);
        const auto m = bundled(name);
        const FlowDiscretization d(m);
        const auto pol = lowest_index_policy(m);
        const Vector ones = Vector::Ones(static_cast<Eigen::Index>(m.interior_size()));
        for (std::size_t x = 0; x + 1 < m.interior_size(); x += 5) {
            const double y = 0.5 * (m.grid.points[x] + m.grid.points[x + 1]);
            CHECK(op_G(m, 0.0, ones, build_path(d, pol, y)) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("linearity and monotonicity of the jump operator") {
    const auto m = bundled("drift_boundary");
    const FlowDiscretization d(m);
    std::uint64_t seed = 99;
    const auto pol = random_policy(m, seed);
    const auto n = static_cast<Eigen::Index>(m.interior_size());
    for (int trial = 0; trial < 5; ++trial) {
        const Vector h1 = Vector::Random(n), h2 = Vector::Random(n);
        const double a = 0.7, b = -1.3;
        const auto p = build_path(d, pol, m.grid.points[static_cast<std::size_t>(trial * 9)]);
        const double lhs = op_G(m, 0.1, a * h1 + b * h2, p);
        const double rhs = a * op_G(m, 0.1, h1, p) + b * op_G(m, 0.1, h2, p);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
        const Vector lo = h1.cwiseMin(h2), hi = h1.cwiseMax(h2);
        CHECK(op_G(m, 0.1, lo, p) <= op_G(m, 0.1, hi, p) + 1e-15);
        const Matrix v1 = Matrix::Random(m.jump_rate.rows(), m.jump_rate.cols());
        const Matrix v2 = Matrix::Random(m.jump_rate.rows(), m.jump_rate.cols());
        CHECK(op_L(m, 0.1, a * v1 + b * v2, p) ==
              doctest::Approx(a * op_L(m, 0.1, v1, p) + b * op_L(m, 0.1, v2, p)).epsilon(1e-10));
    }
}

TEST_CASE("cells are ordered downstream first") {
    const auto m = bundled("drift_boundary");
    const FlowDiscretization d(m);
    std::vector<int> seen(m.interior_size(), 0);
    for (const std::size_t i : d.backward_order()) {
        const auto& c = d.cell(i);
        if (c.end == CellEnd::grid) CHECK(seen[c.next] == 1);
        seen[i] = 1;
    }
    CHECK(d.cell(63).end == CellEnd::boundary);
    CHECK(d.cell(0).end == CellEnd::grid);
    CHECK(d.cell(0).next == 1);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK((d.cell(i).times.size() - 1) % 2 == 0);
}
