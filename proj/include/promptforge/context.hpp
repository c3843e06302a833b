#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "promptforge/core.hpp"
#include "promptforge/evaluation.hpp"
#include "promptforge/gateway.hpp"

namespace promptforge {

struct RoleSet {
    BackendRole extractor = default_backend_role(Role::extractor);
    BackendRole generator = default_backend_role(Role::generator);
    BackendRole agent = default_backend_role(Role::agent);
    BackendRole judge = default_backend_role(Role::judge);
};

// Everything the optimization stages share: where calls go, which model
// plays which role, how answers are scored.
struct OptimizerContext {
    Gateway* gateway = nullptr;
    RoleSet roles;
    MetricKind metric;
    std::size_t parallelism = 8;
    // When set, only this component is optimized; every other slot and the
    // demonstrations are kept empty.
    std::optional<std::string> only_slot;

    Gateway& gw() const { return *gateway; }
};

inline PromptComponents restrict_to_slot(PromptComponents prompt, const std::optional<std::string>& slot) {
    if (!slot) return prompt;
    for (auto& c : prompt.components)
        if (c.name != *slot) c.text.clear();
    prompt.demonstrations.clear();
    return prompt;
}

}  // namespace promptforge
