#include "pdmp/policy.hpp"

#include <algorithm>
#include <string>

namespace pdmp {

FeedbackPolicy lowest_index_policy(const PdmpModel& model) {
    FeedbackPolicy p;
    for (const auto& set : model.actions.feasible) p.interior.push_back(*std::min_element(set.begin(), set.end()));
    for (const auto& set : model.actions.feasible_boundary)
        p.boundary.push_back(*std::min_element(set.begin(), set.end()));
    return p;
}

namespace {

bool contains(const std::vector<int>& set, int a) { return std::find(set.begin(), set.end(), a) != set.end(); }

}  // namespace

void require_feasible(const PdmpModel& model, const FeedbackPolicy& policy) {
    if (policy.interior.size() != model.grid.interior_size() ||
        policy.boundary.size() != model.grid.boundary_size())
        throw ModelError("policy has " + std::to_string(policy.interior.size()) + "+" +
                         std::to_string(policy.boundary.size()) + " entries, model needs " +
                         std::to_string(model.grid.interior_size()) + "+" +
                         std::to_string(model.grid.boundary_size()));
    for (std::size_t i = 0; i < policy.interior.size(); ++i)
        if (!contains(model.actions.feasible[i], policy.interior[i]))
            throw ModelError("policy action " + std::to_string(policy.interior[i]) +
                             " is infeasible at interior point " + std::to_string(i));
    for (std::size_t b = 0; b < policy.boundary.size(); ++b)
        if (!contains(model.actions.feasible_boundary[b], policy.boundary[b]))
            throw ModelError("policy action " + std::to_string(policy.boundary[b]) +
                             " is infeasible at boundary point " + std::to_string(b));
}

bool is_feasible(const PdmpModel& model, const FeedbackPolicy& policy) {
    try {
        require_feasible(model, policy);
        return true;
    } catch (const ModelError&) {
        return false;
    }
}

std::size_t count_changes(const FeedbackPolicy& a, const FeedbackPolicy& b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < std::min(a.interior.size(), b.interior.size()); ++i) n += a.interior[i] != b.interior[i];
    for (std::size_t i = 0; i < std::min(a.boundary.size(), b.boundary.size()); ++i) n += a.boundary[i] != b.boundary[i];
    return n;
}

}  // namespace pdmp
