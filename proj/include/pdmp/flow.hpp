#pragma once

#include "pdmp/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace pdmp {

enum class FlowKind { trivial, affine1d, tabulated1d };

/// Deterministic motion between jumps.
///
/// `affine1d` integrates dy/dt = alpha0 + alpha1 * y. `tabulated1d` uses a
/// velocity sampled at `velocity_points` and linearly interpolated between
/// samples (held constant outside them), which makes the flow affine on each
/// sampling interval and therefore solvable in closed form.
struct FlowSpec {
    FlowKind kind = FlowKind::trivial;
    double alpha0 = 0.0;
    double alpha1 = 0.0;
    std::vector<double> velocity_points;
    std::vector<double> velocity;
    /// Truncation horizon used when the flow never reaches the boundary.
    double t_max = 0.0;
    double domain_lo = -kInfinity;
    double domain_hi = kInfinity;
};

const char* to_string(FlowKind kind);
std::optional<FlowKind> flow_kind_from_string(const std::string& name);

/// Flow lines on the real line together with the boundary set they may hit.
class Flow {
public:
    Flow(FlowSpec spec, std::vector<double> boundary);

    const FlowSpec& spec() const { return spec_; }
    const std::vector<double>& boundary() const { return boundary_; }
    double horizon() const { return spec_.t_max; }

    double velocity(double y) const;
    /// Sign of the velocity at y: -1, 0 or +1.
    int direction(double y) const;

    /// Time for the flow started at `from` to reach `to`; infinite when it never does.
    double travel_time(double from, double to) const;

    /// phi(x, t) without checking the boundary.
    double advance_unchecked(double x, double t) const;

    /// phi(x, t); throws FlowError when t exceeds the hitting time.
    double advance(double x, double t) const;

    /// Hitting time of the boundary from an interior state, kInfinity if never.
    double hit_time(double x) const;

    /// Index into boundary() of the point reached from x, if any.
    std::optional<std::size_t> hit_boundary(double x) const;

    /// Time at which the flow from x leaves [domain_lo, domain_hi] through an
    /// end that is not a boundary point; kInfinity when it never does.
    double escape_time(double x) const;

private:
    struct Piece {
        double lo, hi;  // validity interval
        double a, b;    // velocity a + b*y
    };

    std::size_t piece_index(double y, int dir) const;
    std::optional<std::size_t> nearest_boundary(double x, int dir) const;

    FlowSpec spec_;
    std::vector<double> boundary_;
    std::vector<Piece> pieces_;
};

/// Time mesh along one flow line.
struct FlowMesh {
    double origin = 0.0;
    std::vector<double> times;
    std::vector<double> states;
};

/// Uniform mesh over [0, min(t*(x), T_max)] with `resolution` nodes, refined
/// further until node spacing is at most `max_spacing`.
FlowMesh build_mesh(const Flow& flow, double x, std::size_t resolution,
                    double max_spacing = kInfinity);

/// Finite-difference derivative of a tabulated function along the flow at x.
///
/// `points` must be strictly increasing; central three-point differences are
/// used in the interior of the table and one-sided three-point differences at
/// its ends.
double flow_derivative(const Flow& flow, std::span<const double> points,
                       std::span<const double> values, double x);

}  // namespace pdmp
