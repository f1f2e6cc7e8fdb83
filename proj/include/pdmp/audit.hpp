#pragma once

#include "pdmp/evaluation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pdmp {

enum class AuditStatus { pass, fail, not_checkable };

const char* to_string(AuditStatus status);

/// One audited inequality. Slack is (right side - left side): negative means violated.
struct AuditItem {
    std::string id;
    std::string description;
    AuditStatus status = AuditStatus::pass;
    double worst_slack = kInfinity;
    std::string location;           // state (and action) achieving the worst slack
    std::vector<double> state_slack;  // worst slack per audited state
    std::string note;
};

struct AuditReport {
    std::vector<AuditItem> items;
    std::optional<ErgodicityEstimate> ergodicity;

    bool passed() const;
    const AuditItem* find(const std::string& id) const;
};

struct AuditOptions {
    double tol = 1e-9;
    DiscretizationOptions mesh;
};

/// Checks the growth, Lyapunov and rate conditions on every grid state. With a
/// policy, also checks the kernel drift of that policy and estimates its
/// ergodicity constants; without one, the kernel drift is maximised over all
/// feedback policies.
AuditReport audit_assumptions(const PdmpModel& model, const std::optional<FeedbackPolicy>& policy = std::nullopt,
                              const AuditOptions& options = {});

}  // namespace pdmp
