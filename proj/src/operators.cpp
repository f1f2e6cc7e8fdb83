#include "pdmp/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace pdmp {

namespace {

// (1 - exp(-z)) / z, continuous at 0.
double phi1(double z) {
    if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
    return -std::expm1(-z) / z;
}

// weight * value with 0 * inf == 0 (a tail that never contributes).
double tail_term(double weight, double value) { return value == 0.0 ? 0.0 : weight * value; }

double lerp(const Matrix& table, const NodeSample& s, int action) {
    const double lo = table(static_cast<Eigen::Index>(s.lo), action);
    if (s.theta == 0.0) return lo;
    return (1.0 - s.theta) * lo + s.theta * table(static_cast<Eigen::Index>(s.hi), action);
}

double tail_weight(double end_weight, double beta) { return beta > 0.0 ? end_weight / beta : kInfinity; }

}  // namespace

namespace {

// Exponentially fitted trapezoid over every `stride`-th node; adds scale times
// its node weights into `node` and returns the survival weight at the end.
double fitted_trapezoid(std::span<const double> times, std::span<const double> rates, double alpha,
                        std::size_t stride, double scale, std::vector<double>& node) {
    double weight = 1.0;
    for (std::size_t k = 0; k + stride < times.size(); k += stride) {
        const double dt = times[k + stride] - times[k];
        const double z = (alpha + 0.5 * (rates[k] + rates[k + stride])) * dt;
        const double e = 0.5 * scale * weight * dt * phi1(z);
        node[k] += e;
        node[k + stride] += e;
        weight *= std::exp(-z);
    }
    return weight;
}

}  // namespace

NodeWeights quadrature_weights(std::span<const double> times, std::span<const double> rates, double alpha,
                               bool tail) {
    NodeWeights w;
    w.node.assign(times.size(), 0.0);
    const std::size_t segments = times.empty() ? 0 : times.size() - 1;
    if (segments == 0) {
        w.end = 1.0;
    } else if (segments % 2 == 1) {
        w.end = fitted_trapezoid(times, rates, alpha, 1, 1.0, w.node);
    } else {
        const double fine = fitted_trapezoid(times, rates, alpha, 1, 4.0 / 3.0, w.node);
        const double coarse = fitted_trapezoid(times, rates, alpha, 2, -1.0 / 3.0, w.node);
        w.end = (4.0 * fine - coarse) / 3.0;
    }
    if (tail) w.tail = tail_weight(w.end, alpha + rates.back());
    return w;
}

FlowDiscretization::FlowDiscretization(const PdmpModel& model, DiscretizationOptions options)
    : model_(&model), options_(options) {
    const std::size_t nodes = model.grid.node_count();
    sorted_nodes_.resize(nodes);
    std::iota(sorted_nodes_.begin(), sorted_nodes_.end(), 0);
    std::sort(sorted_nodes_.begin(), sorted_nodes_.end(),
              [&](auto a, auto b) { return model.grid.node(a) < model.grid.node(b); });
    for (auto k : sorted_nodes_) sorted_coords_.push_back(model.grid.node(k));

    const Flow flow = model.flow();
    const std::size_t n = model.interior_size();
    cells_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) cells_.push_back(make_cell(i, flow));

    // 0 = unvisited, 1 = on the current chain, 2 = placed
    std::vector<int> state(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> chain;
        std::size_t c = i;
        while (state[c] != 2) {
            if (state[c] == 1)
                throw ModelError("flow cells form a cycle through grid point " + std::to_string(c));
            state[c] = 1;
            chain.push_back(c);
            if (cells_[c].end != CellEnd::grid) break;
            c = cells_[c].next;
        }
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            state[*it] = 2;
            order_.push_back(*it);
        }
    }

    const std::size_t na = model.action_count();
    moments_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        moments_[i].reserve(na);
        for (std::size_t a = 0; a < na; ++a)
            moments_[i].push_back(cell_moments(model, cells_[i], static_cast<int>(a), 0.0));
    }
}

NodeSample FlowDiscretization::sample(double y) const {
    if (y <= sorted_coords_.front()) return {sorted_nodes_.front(), sorted_nodes_.front(), 0.0};
    if (y >= sorted_coords_.back()) return {sorted_nodes_.back(), sorted_nodes_.back(), 0.0};
    const auto it = std::upper_bound(sorted_coords_.begin(), sorted_coords_.end(), y);
    const std::size_t j = static_cast<std::size_t>(it - sorted_coords_.begin()) - 1;
    const double theta = (y - sorted_coords_[j]) / (sorted_coords_[j + 1] - sorted_coords_[j]);
    return {sorted_nodes_[j], sorted_nodes_[j + 1], theta};
}

void FlowDiscretization::fill_mesh(Cell& cell, const Flow& flow, double start, double duration,
                                   std::size_t lo, std::size_t hi) const {
    const auto& m = *model_;
    double sup_rate = 0.0;
    for (std::size_t a = 0; a < m.action_count(); ++a)
        sup_rate = std::max({sup_rate, m.jump_rate(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(a)),
                             m.jump_rate(static_cast<Eigen::Index>(hi), static_cast<Eigen::Index>(a))});
    std::size_t segments = std::max<std::size_t>(options_.resolution, 1);
    if (sup_rate > 0.0)
        segments = std::max(segments, static_cast<std::size_t>(
                                          std::ceil(duration * sup_rate / options_.spacing_factor)));
    segments += segments % 2;
    const double y_lo = m.grid.node(lo), y_hi = m.grid.node(hi);
    cell.times.resize(segments + 1);
    cell.states.resize(segments + 1);
    cell.samples.resize(segments + 1);
    for (std::size_t k = 0; k <= segments; ++k) {
        const double t = k == segments ? duration
                                       : duration * static_cast<double>(k) / static_cast<double>(segments);
        double y = flow.advance_unchecked(start, t);
        if (k == 0) y = start;
        if (k == segments && cell.end != CellEnd::open) y = cell.end == CellEnd::grid
                                                             ? m.grid.points[cell.next]
                                                             : m.grid.boundary_points[cell.next];
        const double theta = std::clamp((y - y_lo) / (y_hi - y_lo), 0.0, 1.0);
        cell.times[k] = t;
        cell.states[k] = y;
        cell.samples[k] = {lo, hi, theta};
    }
}

Cell FlowDiscretization::make_cell(std::size_t i, const Flow& flow) const {
    const auto& m = *model_;
    Cell cell;
    cell.origin = i;
    const double x = m.grid.points[i];
    const int dir = flow.direction(x);
    auto frozen = [&] {
        cell.end = CellEnd::open;
        cell.frozen = true;
        cell.times = {0.0};
        cell.states = {x};
        cell.samples = {NodeSample{i, i, 0.0}};
        return cell;
    };
    if (m.flow_spec.kind == FlowKind::trivial || dir == 0) return frozen();

    const auto pos = static_cast<std::ptrdiff_t>(
        std::lower_bound(sorted_coords_.begin(), sorted_coords_.end(), x) - sorted_coords_.begin());
    const std::ptrdiff_t nbr = pos + dir;
    if (nbr < 0 || nbr >= static_cast<std::ptrdiff_t>(sorted_nodes_.size())) {
        if (std::isfinite(flow.escape_time(x)))
            throw ModelError("flow from grid point " + std::to_string(i) + " leaves the domain");
        return frozen();  // tables are clamped beyond the outermost node
    }
    const std::size_t node = sorted_nodes_[static_cast<std::size_t>(nbr)];
    const std::size_t lo = dir > 0 ? i : node;
    const std::size_t hi = dir > 0 ? node : i;
    const double tau = flow.travel_time(x, m.grid.node(node));
    if (std::isfinite(tau)) {
        const std::size_t n = m.interior_size();
        cell.end = node < n ? CellEnd::grid : CellEnd::boundary;
        cell.next = node < n ? node : node - n;
        fill_mesh(cell, flow, x, tau, lo, hi);
    } else {
        cell.end = CellEnd::open;
        fill_mesh(cell, flow, x, flow.horizon(), lo, hi);
    }
    return cell;
}

std::optional<std::size_t> FlowDiscretization::cell_containing(double y) const {
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        const auto& c = cells_[i];
        const double a = c.states.front();
        if (y == a) return i;
        if (c.frozen) continue;
        const double b = c.end == CellEnd::open ? c.states.back()
                                                : (c.end == CellEnd::grid ? model_->grid.points[c.next]
                                                                          : model_->grid.boundary_points[c.next]);
        if ((a < y && y < b) || (b < y && y < a)) return i;
    }
    return std::nullopt;
}

Cell FlowDiscretization::partial_cell(std::size_t i, double y) const {
    const Cell& full = cells_[i];
    if (y == full.states.front() || full.frozen) return full;
    const Flow flow = model_->flow();
    Cell cell;
    cell.origin = i;
    cell.end = full.end;
    cell.next = full.next;
    const auto& s = full.samples.front();
    double duration = flow.horizon();
    if (full.end != CellEnd::open) {
        const double target = full.end == CellEnd::grid ? model_->grid.points[full.next]
                                                        : model_->grid.boundary_points[full.next];
        duration = flow.travel_time(y, target);
    }
    fill_mesh(cell, flow, y, duration, s.lo, s.hi);
    return cell;
}

const CellMoments& FlowDiscretization::moments(std::size_t cell, int action) const {
    return moments_[cell][static_cast<std::size_t>(action)];
}

CellMoments cell_moments(const PdmpModel& model, const Cell& cell, int action, double alpha) {
    const std::size_t nodes = cell.times.size();
    std::vector<double> rate(nodes), cost(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        rate[k] = lerp(model.jump_rate, cell.samples[k], action);
        cost[k] = lerp(model.running_cost, cell.samples[k], action);
    }
    const bool open = cell.end == CellEnd::open;
    const auto w = quadrature_weights(cell.times, rate, alpha, open);
    CellMoments m;
    m.lo = cell.samples.front().lo;
    m.hi = cell.samples.front().hi;
    for (std::size_t k = 0; k < nodes; ++k) {
        const double e = w.node[k];
        const double t = cell.samples[k].theta;
        m.sojourn += e;
        m.cost += e * cost[k];
        m.mass_lo += e * (1.0 - t) * rate[k];
        m.mass_hi += e * t * rate[k];
    }
    if (open) {
        const double tl = cell.samples.back().theta;
        m.sojourn += w.tail;
        m.cost += tail_term(w.tail, cost.back());
        m.mass_lo += tail_term(w.tail, (1.0 - tl) * rate.back());
        m.mass_hi += tail_term(w.tail, tl * rate.back());
        m.survival = 0.0;
        if (!cell.frozen) m.truncation = w.tail;
    } else {
        m.survival = w.end;
    }
    return m;
}

PolicyPath build_path(const FlowDiscretization& disc, const FeedbackPolicy& policy, double x) {
    const auto start = disc.cell_containing(x);
    if (!start) throw FlowError("state " + std::to_string(x) + " lies in no flow cell");
    PolicyPath path;
    path.origin = x;
    std::size_t c = *start;
    Cell first = disc.partial_cell(c, x);
    const Cell* cell = &first;
    double offset = 0.0;
    while (true) {
        const int action = policy.interior[cell->origin];
        const std::size_t begin = path.times.empty() ? 0 : 1;  // joint node is shared
        path.pieces.push_back(path.times.empty() ? 0 : path.times.size() - 1);
        for (std::size_t k = begin; k < cell->times.size(); ++k) {
            path.times.push_back(offset + cell->times[k]);
            path.states.push_back(cell->states[k]);
            path.samples.push_back(cell->samples[k]);
        }
        for (std::size_t k = 0; k + 1 < cell->times.size(); ++k) path.actions.push_back(action);
        offset += cell->times.back();
        if (cell->end == CellEnd::boundary) {
            path.boundary = cell->next;
            path.boundary_action = policy.boundary[cell->next];
            break;
        }
        if (cell->end == CellEnd::open) {
            path.open = true;
            path.tail_action = action;
            break;
        }
        cell = &disc.cell(cell->next);
    }
    return path;
}

namespace {

struct SweepEnd {
    double end = 1.0;   // survival weight at the last node
    double tail = 0.0;  // weight of the frozen tail of an open path
};

// Walks the cells of a path, calling visit(node, weight, rate, action) with the
// quadrature weight of every node of every cell (a node shared by two cells is
// visited once per cell). Weights match the per-cell moments exactly.
template <class Visit>
SweepEnd sweep(const PdmpModel& model, double alpha, const PolicyPath& path, Visit&& visit) {
    SweepEnd out;
    const std::size_t last_node = path.times.size() - 1;
    for (std::size_t p = 0; p < path.pieces.size(); ++p) {
        const std::size_t first = path.pieces[p];
        const std::size_t last = p + 1 < path.pieces.size() ? path.pieces[p + 1] : last_node;
        const bool final_piece = p + 1 == path.pieces.size();
        const int action = first < last ? path.actions[first] : path.tail_action;
        std::vector<double> rates;
        for (std::size_t j = first; j <= last; ++j) rates.push_back(lerp(model.jump_rate, path.samples[j], action));
        const std::span<const double> times(path.times.data() + first, last - first + 1);
        const auto w = quadrature_weights(times, rates, alpha, final_piece && path.open);
        for (std::size_t j = first; j <= last; ++j) visit(j, out.end * w.node[j - first], rates[j - first], action);
        if (final_piece && path.open) out.tail = out.end * w.tail;
        out.end *= w.end;
    }
    return out;
}

double q_apply(const PdmpModel& model, const NodeSample& s, int a, const Vector& h) {
    const double lo = kernel_apply(model, s.lo, a, h);
    if (s.theta == 0.0) return lo;
    return (1.0 - s.theta) * lo + s.theta * kernel_apply(model, s.hi, a, h);
}

}  // namespace

double kernel_apply(const PdmpModel& model, std::size_t node, int action, const Vector& h) {
    return model.kernel[static_cast<std::size_t>(action)].row(static_cast<Eigen::Index>(node)).dot(h);
}

double cum_rate(const PdmpModel& model, const PolicyPath& path, double t) {
    if (t < 0.0) throw FlowError("negative time");
    if (path.boundary && t > path.times.back() * (1.0 + 1e-12)) throw FlowError("time beyond the hitting time");
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
        const int a = path.actions[k];
        const double mean = 0.5 * (lerp(model.jump_rate, path.samples[k], a) +
                                   lerp(model.jump_rate, path.samples[k + 1], a));
        const double t0 = path.times[k], t1 = path.times[k + 1];
        if (t <= t1) return total + mean * (t - t0);
        total += mean * (t1 - t0);
    }
    if (path.open && t > path.times.back())
        total += (t - path.times.back()) * lerp(model.jump_rate, path.samples.back(), path.tail_action);
    return total;
}

double op_L(const PdmpModel& model, double alpha, const Matrix& v, const PolicyPath& path) {
    double total = 0.0;
    const auto end = sweep(model, alpha, path, [&](std::size_t j, double e, double, int a) {
        total += e * lerp(v, path.samples[j], a);
    });
    if (path.open) total += tail_term(end.tail, lerp(v, path.samples.back(), path.tail_action));
    return total;
}

double op_calL(const PdmpModel& model, double alpha, const PolicyPath& path) {
    const Matrix ones = Matrix::Ones(static_cast<Eigen::Index>(model.grid.node_count()),
                                     static_cast<Eigen::Index>(model.action_count()));
    return op_L(model, alpha, ones, path);
}

double op_H(const PdmpModel& model, double alpha, const Matrix& w, const PolicyPath& path) {
    if (!path.boundary) return 0.0;
    const auto end = sweep(model, alpha, path, [](std::size_t, double, double, int) {});
    return end.end * w(static_cast<Eigen::Index>(*path.boundary), path.boundary_action);
}

double op_G(const PdmpModel& model, double alpha, const Vector& h, const PolicyPath& path) {
    double total = 0.0;
    const auto end = sweep(model, alpha, path, [&](std::size_t j, double e, double rate, int a) {
        if (e != 0.0 && rate != 0.0) total += e * rate * q_apply(model, path.samples[j], a, h);
    });
    if (path.open) {
        const auto& s = path.samples.back();
        const double rate = lerp(model.jump_rate, s, path.tail_action);
        total += tail_term(end.tail, rate * q_apply(model, s, path.tail_action, h));
    }
    if (path.boundary)
        total += end.end * kernel_apply(model, model.grid.boundary_node(*path.boundary), path.boundary_action, h);
    return total;
}

Vector kernel_row(const PdmpModel& model, double alpha, const PolicyPath& path) {
    const auto n = static_cast<Eigen::Index>(model.interior_size());
    Vector row = Vector::Zero(n);
    auto add_node = [&](const NodeSample& s, int a, double coef) {
        if (coef == 0.0) return;
        const auto& q = model.kernel[static_cast<std::size_t>(a)];
        row += (coef * (1.0 - s.theta)) * q.row(static_cast<Eigen::Index>(s.lo)).transpose();
        if (s.theta != 0.0) row += (coef * s.theta) * q.row(static_cast<Eigen::Index>(s.hi)).transpose();
    };
    const auto end = sweep(model, alpha, path, [&](std::size_t j, double e, double rate, int a) {
        add_node(path.samples[j], a, e * rate);
    });
    if (path.open) {
        const auto& s = path.samples.back();
        const double rate = lerp(model.jump_rate, s, path.tail_action);
        add_node(s, path.tail_action, tail_term(end.tail, rate));
    }
    if (path.boundary)
        row += end.end * model.kernel[static_cast<std::size_t>(path.boundary_action)]
                             .row(static_cast<Eigen::Index>(model.grid.boundary_node(*path.boundary)))
                             .transpose();
    return row;
}

PolicyTerms policy_terms(const FlowDiscretization& disc, const FeedbackPolicy& policy, double alpha) {
    const auto& model = disc.model();
    require_feasible(model, policy);
    const auto n = static_cast<Eigen::Index>(model.interior_size());
    PolicyTerms t;
    t.sojourn = Vector::Zero(n);
    t.running = Vector::Zero(n);
    t.boundary = Vector::Zero(n);
    t.kernel = Matrix::Zero(n, n);
    for (const std::size_t i : disc.backward_order()) {
        const auto& cell = disc.cell(i);
        const int a = policy.interior[i];
        const CellMoments m = alpha == 0.0 ? disc.moments(i, a) : cell_moments(model, cell, a, alpha);
        const auto& q = model.kernel[static_cast<std::size_t>(a)];
        const auto row = static_cast<Eigen::Index>(i);
        t.sojourn(row) = m.sojourn;
        t.running(row) = m.cost;
        t.kernel.row(row) = m.mass_lo * q.row(static_cast<Eigen::Index>(m.lo));
        if (m.mass_hi != 0.0) t.kernel.row(row) += m.mass_hi * q.row(static_cast<Eigen::Index>(m.hi));
        t.truncation = std::max(t.truncation, m.truncation);
        if (cell.end == CellEnd::grid) {
            const auto j = static_cast<Eigen::Index>(cell.next);
            t.sojourn(row) += m.survival * t.sojourn(j);
            t.running(row) += m.survival * t.running(j);
            t.boundary(row) = m.survival * t.boundary(j);
            t.kernel.row(row) += m.survival * t.kernel.row(j);
        } else if (cell.end == CellEnd::boundary) {
            const int ub = policy.boundary[cell.next];
            const auto node = static_cast<Eigen::Index>(model.grid.boundary_node(cell.next));
            t.boundary(row) = m.survival * model.boundary_cost(static_cast<Eigen::Index>(cell.next), ub);
            t.kernel.row(row) += m.survival * model.kernel[static_cast<std::size_t>(ub)].row(node);
        }
    }
    return t;
}

Matrix kernel_matrix(const FlowDiscretization& disc, const FeedbackPolicy& policy, double alpha) {
    return policy_terms(disc, policy, alpha).kernel;
}

Matrix kernel_matrix(const PdmpModel& model, const FeedbackPolicy& policy, double alpha) {
    const FlowDiscretization disc(model);
    return kernel_matrix(disc, policy, alpha);
}

}  // namespace pdmp
