#pragma once

#include "pdmp/model.hpp"

#include <vector>

namespace pdmp {

/// Ordinary feedback selector on the grid: one action index per interior
/// point and one per boundary point. Along a flow line the action of a grid
/// point is held until the flow reaches the next grid node.
struct FeedbackPolicy {
    std::vector<int> interior;
    std::vector<int> boundary;

    bool operator==(const FeedbackPolicy&) const = default;
};

/// Lowest feasible action index everywhere.
FeedbackPolicy lowest_index_policy(const PdmpModel& model);

bool is_feasible(const PdmpModel& model, const FeedbackPolicy& policy);

/// Throws ModelError naming the first infeasible entry.
void require_feasible(const PdmpModel& model, const FeedbackPolicy& policy);

/// Number of interior and boundary entries that differ.
std::size_t count_changes(const FeedbackPolicy& a, const FeedbackPolicy& b);

}  // namespace pdmp
