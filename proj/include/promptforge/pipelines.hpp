#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "promptforge/core.hpp"
#include "promptforge/gateway.hpp"

namespace promptforge {

// The agent under optimization: render the prompt for `input`, make one call,
// return the reply verbatim.
std::string run_agent(const PromptComponents& prompt, std::string_view input, Gateway& gateway,
                      const BackendRole& agent);

enum class BaselineKind { cot, sequential_cot, self_consistency_cot };

std::string_view to_string(BaselineKind kind);
std::string_view display_name(BaselineKind kind);
std::optional<BaselineKind> baseline_from_string(std::string_view s);

struct BaselineOptions {
    BackendRole agent = default_backend_role(Role::agent);
    BackendRole selector = default_backend_role(Role::judge);
    int k = 5;                        // self-consistency samples
    double sample_temperature = 0.7;  // used for self-consistency samples
    std::int64_t seed = 0;
    std::string instruction;  // optional optimized instruction shared by all baselines
    std::size_t parallelism = 8;
};

// cot: 1 agent call. sequential_cot: draft then answer, 2 agent calls.
// self_consistency_cot: k sampled cot calls then one selector call.
// Returns the final answer text (after the last "Answer:" marker when present).
std::string run_baseline(BaselineKind kind, std::string_view input, Gateway& gateway,
                         const BaselineOptions& options);

// 1-based candidate index from a "SELECTED: <n>" line; throws SelectionFailed.
std::size_t parse_selection(std::string_view reply, std::size_t candidates);

}  // namespace promptforge
