#pragma once

#include "pdmp/evaluation.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pdmp {

/// Counter-based uniform variates in (0, 1): every (seed, replication, jump,
/// slot) tuple maps to an independent draw.
double uniform01(std::uint64_t seed, std::uint64_t replication, std::uint64_t jump, std::uint64_t slot);

struct SimulationOptions {
    std::size_t max_jumps = 50'000'000;
    std::size_t batches = 20;
    /// Sample sojourns by thinning instead of inverting the cumulative rate.
    bool thinning = false;
    bool record_events = false;
    /// Worker cap for replications; 0 means hardware concurrency.
    std::size_t threads = 0;
};

enum class EventType { jump, boundary, end };

const char* to_string(EventType type);

struct TrajectoryEvent {
    double t = 0.0;
    EventType type = EventType::jump;
    double state = 0.0;  // state after the event
    double cost_so_far = 0.0;
};

struct TrajectoryRecord {
    std::vector<double> jump_times;
    std::vector<double> post_jump_states;
    std::vector<char> boundary_hit;  // per jump
    double running_cost = 0.0;
    double boundary_cost = 0.0;
    std::size_t boundary_hits = 0;  // p*(t)
    std::size_t jumps = 0;          // N(t)
    double final_time = 0.0;
    std::vector<TrajectoryEvent> events;  // only with record_events
};

struct SimulationSummary {
    double average = 0.0;
    double std_error = 0.0;  // batch means
    std::vector<double> batch_means;
    std::size_t jumps = 0;
    std::size_t boundary_hits = 0;
    std::uint64_t seed = 0;
    double horizon = 0.0;
};

struct Sojourn {
    double time = 0.0;
    bool hit_boundary = false;
};

/// Simulates a feedback policy on the flow cells of a discretization. Between
/// mesh nodes the jump rate and running cost are the segment means used by the
/// solver's quadrature, so simulated and computed costs describe the same process.
class Simulator {
public:
    Simulator(const FlowDiscretization& disc, FeedbackPolicy policy, SimulationOptions options = {});

    /// Sojourn from x whose cumulative rate reaches -log(1 - xi).
    Sojourn sample_sojourn(double x, double xi) const;
    /// Same law by thinning, with draws keyed by (seed, stream).
    Sojourn sample_sojourn_thinning(double x, std::uint64_t seed, std::uint64_t stream) const;

    std::pair<TrajectoryRecord, SimulationSummary> simulate(double x0, double horizon, std::uint64_t seed,
                                                           std::uint64_t replication = 0) const;

    const FeedbackPolicy& policy() const { return policy_; }
    const SimulationOptions& options() const { return options_; }

private:
    struct Table {
        std::vector<double> times;      // local node times
        std::vector<double> cum_rate;   // at nodes
        std::vector<double> cum_cost;   // at nodes
        std::vector<double> rate;       // per segment
        std::vector<double> cost;       // per segment
        std::vector<double> node_rate;  // per node
        std::vector<NodeSample> samples;
        std::vector<double> states;
        CellEnd end = CellEnd::open;
        std::size_t next = 0;
        int action = 0;
        double tail_rate = 0.0;
        double tail_cost = 0.0;
    };
    struct Exit {
        const Table* table = nullptr;
        double local = 0.0;       // time inside the table
        double elapsed = 0.0;     // since the sojourn started
        bool boundary = false;
        std::size_t boundary_index = 0;
        std::ptrdiff_t segment = -1;  // -1: open tail
    };
    Table make_table(const Cell& cell) const;
    const Table& start_table(double x, Table& scratch) const;
    Exit invert(const Table& first, double level) const;
    Exit thin(const Table& first, std::uint64_t seed, std::uint64_t rep, std::uint64_t jump) const;
    std::size_t destination(const Exit& e, std::uint64_t seed, std::uint64_t rep, std::uint64_t jump) const;
    std::size_t draw_row(std::size_t node, int action, double u) const;
    static double cost_at(const Table& t, double local);

    const FlowDiscretization* disc_;
    FeedbackPolicy policy_;
    SimulationOptions options_;
    std::vector<Table> tables_;
    std::vector<std::vector<double>> cdf_;  // per action: node x interior cumulative rows, row-major
    double max_rate_ = 0.0;
};

struct ValidationVerdict {
    bool pass = false;
    double rho = 0.0;
    double mean = 0.0;
    double std_error = 0.0;
    double allowance = 0.0;  // added to 3 SE: floating-point floor plus start-up bias allowance
    std::vector<double> replication_means;
    std::size_t jumps = 0;
    std::size_t boundary_hits = 0;
};

/// Bound on the start-up bias of a time average over `horizon` for the evaluated policy:
/// (2 max|h| + max cost + rho max calL) / horizon.
double transient_allowance(const EvaluationResult& result, double horizon);

/// Independent replications of simulate(); passes iff the pooled mean is
/// within 3 standard errors (plus `bias_allowance`) of rho.
ValidationVerdict mc_validate(const Simulator& sim, double rho, double x0, double horizon, std::size_t replications,
                              std::uint64_t seed, double bias_allowance = 0.0);

}  // namespace pdmp
