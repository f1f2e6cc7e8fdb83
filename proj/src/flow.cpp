#include "pdmp/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pdmp {

namespace {

// Time for dy/dt = a + b*y to move from y0 to y1, infinite when unreachable.
double affine_time(double a, double b, double y0, double y1) {
    const double d = y1 - y0;
    if (d == 0.0) return 0.0;
    const double v0 = a + b * y0;
    if (v0 * d <= 0.0 || std::isinf(y1)) return kInfinity;
    const double v1 = a + b * y1;
    if (v1 * d <= 0.0) return kInfinity;  // fixed point on the way
    if (b == 0.0) return d / a;
    return std::log1p(b * d / v0) / b;
}

double affine_advance(double a, double b, double y0, double t) {
    if (b == 0.0) return y0 + a * t;
    return y0 + (a + b * y0) * std::expm1(b * t) / b;
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

const char* to_string(FlowKind kind) {
    switch (kind) {
        case FlowKind::trivial: return "trivial";
        case FlowKind::affine1d: return "affine1d";
        case FlowKind::tabulated1d: return "tabulated1d";
    }
    return "unknown";
}

std::optional<FlowKind> flow_kind_from_string(const std::string& name) {
    if (name == "trivial") return FlowKind::trivial;
    if (name == "affine1d") return FlowKind::affine1d;
    if (name == "tabulated1d") return FlowKind::tabulated1d;
    return std::nullopt;
}

Flow::Flow(FlowSpec spec, std::vector<double> boundary)
    : spec_(std::move(spec)), boundary_(std::move(boundary)) {
    switch (spec_.kind) {
        case FlowKind::trivial:
            break;
        case FlowKind::affine1d:
            pieces_.push_back({-kInfinity, kInfinity, spec_.alpha0, spec_.alpha1});
            break;
        case FlowKind::tabulated1d: {
            const auto& p = spec_.velocity_points;
            const auto& v = spec_.velocity;
            if (p.empty() || p.size() != v.size())
                throw ModelError("tabulated flow needs one velocity sample per velocity point");
            std::vector<std::size_t> order(p.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](auto i, auto j) { return p[i] < p[j]; });
            pieces_.push_back({-kInfinity, p[order.front()], v[order.front()], 0.0});
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                const double x0 = p[order[k]], x1 = p[order[k + 1]];
                if (!(x1 > x0)) throw ModelError("tabulated flow points must be distinct");
                const double slope = (v[order[k + 1]] - v[order[k]]) / (x1 - x0);
                pieces_.push_back({x0, x1, v[order[k]] - slope * x0, slope});
            }
            pieces_.push_back({p[order.back()], kInfinity, v[order.back()], 0.0});
            break;
        }
    }
}

std::size_t Flow::piece_index(double y, int dir) const {
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
        const auto& pc = pieces_[k];
        if (dir >= 0 ? (pc.lo <= y && y < pc.hi) : (pc.lo < y && y <= pc.hi)) return k;
    }
    return pieces_.size() - 1;
}

double Flow::velocity(double y) const {
    if (pieces_.empty()) return 0.0;
    const auto& pc = pieces_[piece_index(y, 1)];
    return pc.a + pc.b * y;
}

int Flow::direction(double y) const { return sign(velocity(y)); }

double Flow::travel_time(double from, double to) const {
    if (from == to) return 0.0;
    if (pieces_.empty()) return kInfinity;
    const int dir = to > from ? 1 : -1;
    if (direction(from) != dir) return kInfinity;
    double cur = from;
    double total = 0.0;
    while (true) {
        const auto& pc = pieces_[piece_index(cur, dir)];
        const double end = dir > 0 ? std::min(pc.hi, to) : std::max(pc.lo, to);
        const double t = affine_time(pc.a, pc.b, cur, end);
        if (std::isinf(t)) return kInfinity;
        total += t;
        cur = end;
        if (cur == to) return total;
    }
}

double Flow::advance_unchecked(double x, double t) const {
    if (t <= 0.0 || pieces_.empty()) return x;
    const int dir = direction(x);
    if (dir == 0) return x;
    double cur = x;
    double rem = t;
    while (true) {
        const auto& pc = pieces_[piece_index(cur, dir)];
        const double end = dir > 0 ? pc.hi : pc.lo;
        const double te = affine_time(pc.a, pc.b, cur, end);
        if (rem <= te) return affine_advance(pc.a, pc.b, cur, rem);
        rem -= te;
        cur = end;
    }
}

std::optional<std::size_t> Flow::nearest_boundary(double x, int dir) const {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < boundary_.size(); ++k) {
        const double d = (boundary_[k] - x) * dir;
        if (d > 0.0 && (!best || d < (boundary_[*best] - x) * dir)) best = k;
    }
    return best;
}

double Flow::hit_time(double x) const {
    const int dir = direction(x);
    if (dir == 0) return kInfinity;
    const auto b = nearest_boundary(x, dir);
    if (!b) return kInfinity;
    return travel_time(x, boundary_[*b]);
}

std::optional<std::size_t> Flow::hit_boundary(double x) const {
    if (std::isinf(hit_time(x))) return std::nullopt;
    return nearest_boundary(x, direction(x));
}

double Flow::advance(double x, double t) const {
    if (t < 0.0) throw FlowError("negative flow time");
    const double th = hit_time(x);
    if (std::isfinite(th)) {
        if (t > th + 1e-12 * std::max(1.0, th))
            throw FlowError("flow advanced past the boundary hitting time");
        if (t >= th) return boundary_[*nearest_boundary(x, direction(x))];
    }
    return advance_unchecked(x, t);
}

double Flow::escape_time(double x) const {
    const int dir = direction(x);
    if (dir == 0) return kInfinity;
    const double end = dir > 0 ? spec_.domain_hi : spec_.domain_lo;
    if (std::isinf(end)) return kInfinity;
    if (auto b = nearest_boundary(x, dir); b && (boundary_[*b] - end) * dir <= 0.0)
        return kInfinity;
    return travel_time(x, end);
}

FlowMesh build_mesh(const Flow& flow, double x, std::size_t resolution, double max_spacing) {
    const double th = flow.hit_time(x);
    const double end = std::min(th, flow.horizon());
    if (!std::isfinite(end) || end < 0.0)
        throw FlowError("mesh needs a finite hitting time or a positive truncation horizon");
    std::size_t n = std::max<std::size_t>(resolution, 2);
    if (std::isfinite(max_spacing) && max_spacing > 0.0)
        n = std::max(n, static_cast<std::size_t>(std::ceil(end / max_spacing)) + 1);
    FlowMesh mesh;
    mesh.origin = x;
    mesh.times.resize(n);
    mesh.states.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = k + 1 == n ? end : end * static_cast<double>(k) / static_cast<double>(n - 1);
        mesh.times[k] = t;
        mesh.states[k] = (k + 1 == n && end == th) ? flow.advance(x, t) : flow.advance_unchecked(x, t);
    }
    return mesh;
}

double flow_derivative(const Flow& flow, std::span<const double> points,
                       std::span<const double> values, double x) {
    if (points.size() != values.size()) throw ModelError("flow_derivative: table size mismatch");
    const double v = flow.velocity(x);
    if (v == 0.0 || points.size() < 2) return 0.0;
    const std::size_t m = points.size();
    // three consecutive stencil points around x
    std::size_t first;
    const auto it = std::lower_bound(points.begin(), points.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - points.begin());
    if (m == 2) {
        return v * (values[1] - values[0]) / (points[1] - points[0]);
    } else if (it != points.end() && *it == x) {
        first = j == 0 ? 0 : (j + 1 == m ? m - 3 : j - 1);
    } else {
        const std::size_t left = j == 0 ? 0 : j - 1;
        first = std::min(left, m - 3);
    }
    double slope = 0.0;
    for (std::size_t k = first; k < first + 3; ++k) {
        double denom = 1.0;
        for (std::size_t l = first; l < first + 3; ++l)
            if (l != k) denom *= points[k] - points[l];
        double numer = 0.0;
        for (std::size_t l = first; l < first + 3; ++l) {
            if (l == k) continue;
            double prod = 1.0;
            for (std::size_t q = first; q < first + 3; ++q)
                if (q != k && q != l) prod *= x - points[q];
            numer += prod;
        }
        slope += values[k] * numer / denom;
    }
    return v * slope;
}

}  // namespace pdmp
