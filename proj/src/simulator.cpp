#include "pdmp/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace pdmp {

namespace {

std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double lerp(const Matrix& table, const NodeSample& s, int action) {
    const double lo = table(static_cast<Eigen::Index>(s.lo), action);
    if (s.theta == 0.0) return lo;
    return (1.0 - s.theta) * lo + s.theta * table(static_cast<Eigen::Index>(s.hi), action);
}

double mean_and_se(const std::vector<double>& xs, double& se) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    se = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return mean;
}

constexpr std::uint64_t kLevelSlot = 0, kEndSlot = 1, kSideSlot = 2, kRowSlot = 3, kThinSlot = 16;

}  // namespace

double uniform01(std::uint64_t seed, std::uint64_t replication, std::uint64_t jump, std::uint64_t slot) {
    std::uint64_t z = mix(seed);
    z = mix(z ^ replication);
    z = mix(z ^ jump);
    z = mix(z ^ slot);
    return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
}

const char* to_string(EventType type) {
    switch (type) {
        case EventType::jump: return "jump";
        case EventType::boundary: return "boundary";
        case EventType::end: return "end";
    }
    return "?";
}

Simulator::Simulator(const FlowDiscretization& disc, FeedbackPolicy policy, SimulationOptions options)
    : disc_(&disc), policy_(std::move(policy)), options_(options) {
    const auto& m = disc.model();
    require_feasible(m, policy_);
    if (options_.batches == 0) options_.batches = 1;
    for (std::size_t i = 0; i < disc.size(); ++i) tables_.push_back(make_table(disc.cell(i)));
    for (const auto& t : tables_) {
        for (double r : t.rate) max_rate_ = std::max(max_rate_, r);
        max_rate_ = std::max(max_rate_, t.tail_rate);
    }
    const std::size_t nodes = m.grid.node_count(), n = m.interior_size();
    for (std::size_t a = 0; a < m.action_count(); ++a) {
        std::vector<double> cdf(nodes * n);
        for (std::size_t x = 0; x < nodes; ++x) {
            double run = 0.0;
            for (std::size_t y = 0; y < n; ++y) {
                run += m.kernel[a](static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
                cdf[x * n + y] = run;
            }
        }
        cdf_.push_back(std::move(cdf));
    }
}

Simulator::Table Simulator::make_table(const Cell& cell) const {
    const auto& m = disc_->model();
    Table t;
    t.action = policy_.interior[cell.origin];
    t.end = cell.end;
    t.next = cell.next;
    t.times = cell.times;
    t.samples = cell.samples;
    t.states = cell.states;
    const std::size_t nodes = cell.times.size();
    std::vector<double> f(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        t.node_rate.push_back(lerp(m.jump_rate, cell.samples[k], t.action));
        f[k] = lerp(m.running_cost, cell.samples[k], t.action);
    }
    t.cum_rate.assign(nodes, 0.0);
    t.cum_cost.assign(nodes, 0.0);
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
        const double dt = t.times[k + 1] - t.times[k];
        t.rate.push_back(0.5 * (t.node_rate[k] + t.node_rate[k + 1]));
        t.cost.push_back(0.5 * (f[k] + f[k + 1]));
        t.cum_rate[k + 1] = t.cum_rate[k] + t.rate[k] * dt;
        t.cum_cost[k + 1] = t.cum_cost[k] + t.cost[k] * dt;
    }
    if (cell.end == CellEnd::open) {
        t.tail_rate = t.node_rate.back();
        t.tail_cost = f.back();
    }
    return t;
}

const Simulator::Table& Simulator::start_table(double x, Table& scratch) const {
    const auto c = disc_->cell_containing(x);
    if (!c) throw FlowError("state " + std::to_string(x) + " lies in no flow cell");
    if (disc_->cell(*c).states.front() == x) return tables_[*c];
    scratch = make_table(disc_->partial_cell(*c, x));
    return scratch;
}

double Simulator::cost_at(const Table& t, double local) {
    const double dur = t.times.back();
    if (local >= dur) return t.cum_cost.back() + (local > dur ? t.tail_cost * (local - dur) : 0.0);
    const auto it = std::upper_bound(t.times.begin(), t.times.end(), local);
    const std::size_t k = static_cast<std::size_t>(it - t.times.begin()) - 1;
    return t.cum_cost[k] + t.cost[k] * (local - t.times[k]);
}

Simulator::Exit Simulator::invert(const Table& first, double level) const {
    const Table* t = &first;
    double elapsed = 0.0;
    while (true) {
        const double total = t->cum_rate.back();
        if (level < total) {
            const auto it = std::upper_bound(t->cum_rate.begin(), t->cum_rate.end(), level);
            const std::size_t k = static_cast<std::size_t>(it - t->cum_rate.begin()) - 1;
            const double local = std::min(t->times[k] + (level - t->cum_rate[k]) / t->rate[k], t->times[k + 1]);
            return {t, local, elapsed + local, false, 0, static_cast<std::ptrdiff_t>(k)};
        }
        level -= total;
        if (t->end == CellEnd::open) {
            if (!(t->tail_rate > 0.0))
                throw SimulationAbort("sojourn never ends: zero jump rate on a flow line that never reaches the boundary");
            const double local = t->times.back() + level / t->tail_rate;
            return {t, local, elapsed + local, false, 0, -1};
        }
        elapsed += t->times.back();
        if (t->end == CellEnd::boundary) return {t, t->times.back(), elapsed, true, t->next, -1};
        t = &tables_[t->next];
    }
}

Simulator::Exit Simulator::thin(const Table& first, std::uint64_t seed, std::uint64_t rep, std::uint64_t jump) const {
    const Table* t = &first;
    double offset = 0.0;  // elapsed time at the start of *t
    double s = 0.0;
    for (std::uint64_t draw = 0;; ++draw) {
        const double step = max_rate_ > 0.0
                                ? -std::log(uniform01(seed, rep, jump, kThinSlot + 2 * draw)) / max_rate_
                                : kInfinity;
        s += step;
        while (s - offset >= t->times.back() && t->end != CellEnd::open) {
            offset += t->times.back();
            if (t->end == CellEnd::boundary) return {t, t->times.back(), offset, true, t->next, -1};
            t = &tables_[t->next];
        }
        if (!std::isfinite(s))
            throw SimulationAbort("sojourn never ends: zero jump rate on a flow line that never reaches the boundary");
        const double local = s - offset;
        std::ptrdiff_t seg = -1;
        double rate = t->tail_rate;
        if (local < t->times.back()) {
            const auto it = std::upper_bound(t->times.begin(), t->times.end(), local);
            seg = it - t->times.begin() - 1;
            rate = t->rate[static_cast<std::size_t>(seg)];
        } else if (!(t->tail_rate > 0.0)) {
            throw SimulationAbort("sojourn never ends: zero jump rate on a flow line that never reaches the boundary");
        }
        if (uniform01(seed, rep, jump, kThinSlot + 2 * draw + 1) * max_rate_ < rate)
            return {t, local, s, false, 0, seg};
    }
}

std::size_t Simulator::draw_row(std::size_t node, int action, double u) const {
    const std::size_t n = disc_->model().interior_size();
    const auto& cdf = cdf_[static_cast<std::size_t>(action)];
    const auto row = cdf.begin() + static_cast<std::ptrdiff_t>(node * n);
    const double target = u * row[static_cast<std::ptrdiff_t>(n - 1)];
    const auto it = std::upper_bound(row, row + static_cast<std::ptrdiff_t>(n), target);
    std::size_t y = static_cast<std::size_t>(it - row);
    if (y >= n) y = n - 1;
    // never land on a zero-probability state because of a tie at the top
    while (y > 0 && row[static_cast<std::ptrdiff_t>(y)] == row[static_cast<std::ptrdiff_t>(y - 1)]) --y;
    return y;
}

std::size_t Simulator::destination(const Exit& e, std::uint64_t seed, std::uint64_t rep, std::uint64_t jump) const {
    const auto& m = disc_->model();
    const double u_row = uniform01(seed, rep, jump, kRowSlot);
    if (e.boundary)
        return draw_row(m.grid.boundary_node(e.boundary_index), policy_.boundary[e.boundary_index], u_row);
    const Table& t = *e.table;
    NodeSample s = t.samples.back();
    if (e.segment >= 0) {
        const auto k = static_cast<std::size_t>(e.segment);
        const double r0 = t.node_rate[k], r1 = t.node_rate[k + 1];
        s = uniform01(seed, rep, jump, kEndSlot) * (r0 + r1) < r0 ? t.samples[k] : t.samples[k + 1];
    }
    const std::size_t node = uniform01(seed, rep, jump, kSideSlot) < s.theta ? s.hi : s.lo;
    return draw_row(node, t.action, u_row);
}

Sojourn Simulator::sample_sojourn(double x, double xi) const {
    Table scratch;
    const Exit e = invert(start_table(x, scratch), -std::log1p(-xi));
    return {e.elapsed, e.boundary};
}

Sojourn Simulator::sample_sojourn_thinning(double x, std::uint64_t seed, std::uint64_t stream) const {
    Table scratch;
    const Exit e = thin(start_table(x, scratch), seed, stream, 0);
    return {e.elapsed, e.boundary};
}

std::pair<TrajectoryRecord, SimulationSummary> Simulator::simulate(double x0, double horizon, std::uint64_t seed,
                                                                   std::uint64_t replication) const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw Error("horizon must be positive and finite");
    const auto& m = disc_->model();
    const std::size_t nb = options_.batches;
    std::vector<double> edges(nb + 1), at_edge(nb + 1, 0.0);
    for (std::size_t j = 0; j <= nb; ++j) edges[j] = horizon * static_cast<double>(j) / static_cast<double>(nb);
    edges[nb] = horizon;
    std::size_t next_edge = 1;

    TrajectoryRecord rec;
    double t = 0.0, running = 0.0, boundary = 0.0;
    auto total = [&] { return running + boundary; };
    // running cost of table tb between absolute times [from, to], entered at absolute time `entry`
    auto account = [&](const Table& tb, double entry, double from, double to) {
        const double base = cost_at(tb, from - entry);
        while (next_edge <= nb && edges[next_edge] <= to) {
            at_edge[next_edge] = total() + cost_at(tb, edges[next_edge] - entry) - base;
            ++next_edge;
        }
        running += cost_at(tb, to - entry) - base;
    };

    Table scratch;
    const Table* first = &start_table(x0, scratch);
    double state = x0;
    if (options_.record_events) rec.events.push_back({0.0, EventType::jump, x0, 0.0});
    for (std::uint64_t jump = 0;; ++jump) {
        if (rec.jumps >= options_.max_jumps) {
            std::ostringstream os;
            os << "jump-explosion guard: " << rec.jumps << " jumps by time " << t << " (mean jump rate "
               << static_cast<double>(rec.jumps) / std::max(t, 1e-300) << ", largest tabulated rate " << max_rate_
               << ")";
            throw SimulationAbort(os.str());
        }
        const Exit e = options_.thinning
                           ? thin(*first, seed, replication, jump)
                           : invert(*first, -std::log1p(-uniform01(seed, replication, jump, kLevelSlot)));
        bool finished = false;
        const Table* tb = first;
        double entry = t;
        while (true) {
            const double leave = entry + (tb == e.table ? e.local : tb->times.back());
            if (leave >= horizon) {
                account(*tb, entry, entry, horizon);
                finished = true;
                break;
            }
            account(*tb, entry, entry, leave);
            if (tb == e.table) break;
            entry = leave;
            tb = &tables_[tb->next];
        }
        if (finished) {
            t = horizon;
            break;
        }
        t += e.elapsed;
        if (e.boundary) {
            boundary += m.boundary_cost(static_cast<Eigen::Index>(e.boundary_index),
                                        policy_.boundary[e.boundary_index]);
            ++rec.boundary_hits;
        }
        const std::size_t dest = destination(e, seed, replication, jump);
        state = m.grid.points[dest];
        first = &tables_[dest];
        ++rec.jumps;
        rec.jump_times.push_back(t);
        rec.post_jump_states.push_back(state);
        rec.boundary_hit.push_back(e.boundary ? 1 : 0);
        if (options_.record_events)
            rec.events.push_back({t, e.boundary ? EventType::boundary : EventType::jump, state, total()});
    }
    rec.running_cost = running;
    rec.boundary_cost = boundary;
    rec.final_time = t;
    if (options_.record_events) rec.events.push_back({t, EventType::end, state, total()});

    SimulationSummary sum;
    sum.average = total() / horizon;
    for (std::size_t j = 1; j <= nb; ++j)
        sum.batch_means.push_back((at_edge[j] - at_edge[j - 1]) / (edges[j] - edges[j - 1]));
    mean_and_se(sum.batch_means, sum.std_error);
    sum.jumps = rec.jumps;
    sum.boundary_hits = rec.boundary_hits;
    sum.seed = seed;
    sum.horizon = horizon;
    return {std::move(rec), std::move(sum)};
}

double transient_allowance(const EvaluationResult& result, double horizon) {
    const double h = result.h.cwiseAbs().maxCoeff();
    const double cost = result.cost.maxCoeff();
    const double stay = result.sojourn.maxCoeff();
    return (2.0 * h + cost + std::abs(result.rho) * stay) / horizon;
}

ValidationVerdict mc_validate(const Simulator& sim, double rho, double x0, double horizon, std::size_t replications,
                              std::uint64_t seed, double bias_allowance) {
    if (replications == 0) throw Error("at least one replication is required");
    std::vector<SimulationSummary> out(replications);
    std::vector<std::exception_ptr> errors(replications);
    std::size_t workers = sim.options().threads ? sim.options().threads : std::thread::hardware_concurrency();
    workers = std::clamp<std::size_t>(workers, 1, replications);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t r; (r = next++) < replications;) {
            try {
                out[r] = sim.simulate(x0, horizon, seed, r).second;
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    ValidationVerdict v;
    v.rho = rho;
    for (const auto& s : out) {
        v.replication_means.push_back(s.average);
        v.jumps += s.jumps;
        v.boundary_hits += s.boundary_hits;
    }
    v.mean = mean_and_se(v.replication_means, v.std_error);
    if (replications == 1) v.std_error = out.front().std_error;
    v.allowance = 1e-9 * std::max(1.0, std::abs(rho)) + bias_allowance;
    v.pass = std::abs(v.mean - rho) <= 3.0 * v.std_error + v.allowance;
    return v;
}

}  // namespace pdmp
