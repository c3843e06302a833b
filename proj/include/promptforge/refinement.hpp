#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "promptforge/context.hpp"
#include "promptforge/core.hpp"
#include "promptforge/error.hpp"

namespace promptforge {

struct RefinementParams {
    double lambda = 0.7;     // underperformance threshold on mu
    int iterations = 2;      // I, outer passes over the dataset
    int max_repairs = 3;     // K, repair attempts per example per pass
    int improve_rounds = 1;  // self-improvement rounds after each repair
    std::size_t demo_cap = 4;

    void validate() const;
};

struct AcceptedStep {
    int iteration = 0;
    std::string example_id;
    Score old_score;
    Score new_score;
    std::vector<std::string> stages;  // chain stages repaired; empty for single-agent runs

    bool operator==(const AcceptedStep&) const = default;
};

struct RefinementTrace {
    Score initial_score;
    std::vector<AcceptedStep> accepted;
    std::vector<std::pair<std::string, int>> repair_attempts;  // dataset order
    Score final_score;

    bool operator==(const RefinementTrace&) const = default;
};

template <typename State>
struct RefinementOutcome {
    State state;
    Score score;
    RefinementTrace trace;
};

struct Probe {
    std::string answer;
    Score mu;
};

// The repair-and-accept loop, independent of what is being optimized.
// `System` provides
//   Probe probe(const State&, const Example&)
//   State repair(const State&, const Example&, const std::string& answer,
//                std::vector<std::string>& touched_stages)
//   Score aggregate(const State&)
// For each pass and example: while mu < lambda and attempts < K, repair and
// re-probe that example; then, if anything was repaired, score the repaired
// state on the whole dataset and keep it only when it strictly beats the
// current best. Rejected repairs are discarded. Stops as soon as the score
// reaches 1.
template <typename State, typename System>
RefinementOutcome<State> hill_climb(State initial, Score initial_score, const Dataset& dataset,
                                    const RefinementParams& params, System& system) {
    params.validate();
    RefinementOutcome<State> out{std::move(initial), initial_score, {}};
    out.trace.initial_score = initial_score;
    out.trace.final_score = initial_score;
    for (const auto& ex : dataset) out.trace.repair_attempts.emplace_back(ex.id, 0);

    auto done = [&] { return out.score.value() >= 1.0; };
    for (int it = 1; it <= params.iterations && !done(); ++it) {
        for (std::size_t idx = 0; idx < dataset.size() && !done(); ++idx) {
            const Example& ex = dataset[idx];
            with_context("iteration " + std::to_string(it) + ", example " + ex.id, [&] {
                State working = out.state;
                Probe probe = system.probe(working, ex);
                std::vector<std::string> stages;
                int used = 0;
                while (used < params.max_repairs && probe.mu.value() < params.lambda) {
                    working = system.repair(working, ex, probe.answer, stages);
                    ++used;
                    probe = system.probe(working, ex);
                }
                out.trace.repair_attempts[idx].second += used;
                if (used == 0) return;

                Score candidate = system.aggregate(working);
                if (candidate > out.score) {
                    out.trace.accepted.push_back({it, ex.id, out.score, candidate, std::move(stages)});
                    out.state = std::move(working);
                    out.score = candidate;
                }
            });
        }
    }
    out.trace.final_score = out.score;
    return out;
}

// One generator call asking for a minimal edit of the components so that the
// prompt covers `example`. The reply may append `example` to the
// demonstrations; any other change to them, or exceeding `demo_cap`, keeps
// the previous demonstrations. Throws GenerationFailed on backend failure and
// SchemaViolation when the reply breaks the slot structure.
PromptComponents repair_example(const PromptComponents& prompt, const Example& example, std::string_view agent_answer,
                                const FeatureSchema& schema, Gateway& gateway, const BackendRole& generator,
                                std::size_t demo_cap);

// Repair-and-accept refinement of a single agent prompt.
RefinementOutcome<PromptComponents> refine(const CandidatePrompt& candidate, const Dataset& dataset,
                                           const FeatureSchema& schema, const RefinementParams& params,
                                           const OptimizerContext& ctx);

}  // namespace promptforge
