#include "promptforge/refinement.hpp"

#include <algorithm>

#include "promptforge/generation.hpp"
#include "promptforge/pipelines.hpp"
#include "promptforge/prompts.hpp"

namespace promptforge {

void RefinementParams::validate() const {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in (0, 1]");
    if (iterations < 1) throw ConfigError("refinement iterations must be at least 1");
    if (max_repairs < 1) throw ConfigError("max repairs per example must be at least 1");
    if (improve_rounds < 1) throw ConfigError("refinement improve rounds must be at least 1");
}

namespace {

bool demos_acceptable(const std::vector<Demonstration>& proposed, const std::vector<Demonstration>& current,
                      const Example& example, std::size_t cap) {
    if (proposed.size() > cap) return false;
    const Demonstration pair{example.input, example.output};
    for (std::size_t i = 0; i < proposed.size(); ++i) {
        const auto& d = proposed[i];
        bool known = d == pair || std::find(current.begin(), current.end(), d) != current.end();
        if (!known) return false;
        if (std::find(proposed.begin(), proposed.begin() + static_cast<std::ptrdiff_t>(i), d) !=
            proposed.begin() + static_cast<std::ptrdiff_t>(i))
            return false;
    }
    return true;
}

}  // namespace

PromptComponents repair_example(const PromptComponents& prompt, const Example& example, std::string_view agent_answer,
                                const FeatureSchema& schema, Gateway& gateway, const BackendRole& generator,
                                std::size_t demo_cap) {
    if (!prompt.has_schema(schema)) throw SchemaViolation("prompt slots do not match the feature schema");
    std::string reply;
    try {
        reply = gateway.ask(generator, prompts::generator_system(),
                            prompts::repair_prompt(schema, example, agent_answer, demo_cap, prompts::encode_prompt(prompt)),
                            "repair");
    } catch (const std::exception& e) {
        throw GenerationFailed("repair", e.what());
    }
    auto decoded = prompts::decode_prompt(reply, schema);
    PromptComponents next = prompt;
    for (std::size_t i = 0; i < schema.size(); ++i) next.components[i].text = decoded.components[i];
    if (decoded.has_demonstrations && demos_acceptable(decoded.demonstrations, prompt.demonstrations, example, demo_cap))
        next.demonstrations = std::move(decoded.demonstrations);
    return next;
}

namespace {

struct SingleAgentSystem {
    const Dataset& dataset;
    const FeatureSchema& schema;
    const RefinementParams& params;
    const OptimizerContext& ctx;

    Probe probe(const PromptComponents& prompt, const Example& ex) {
        auto answer = run_agent(prompt, ex.input, ctx.gw(), ctx.roles.agent);
        Score mu;
        try {
            mu = score_example(ctx.metric, answer, ex.output, ex.input, ctx.gw());
        } catch (const JudgeParseFailure&) {
            mu = Score(0.0);
        }
        return {std::move(answer), mu};
    }

    PromptComponents repair(const PromptComponents& prompt, const Example& ex, const std::string& answer,
                            std::vector<std::string>&) {
        auto repaired = repair_example(prompt, ex, answer, schema, ctx.gw(), ctx.roles.generator, params.demo_cap);
        auto improved = self_improve_prompt(std::move(repaired), schema, ctx.gw(), ctx.roles.generator,
                                            params.improve_rounds, "refine");
        return restrict_to_slot(std::move(improved.state), ctx.only_slot);
    }

    Score aggregate(const PromptComponents& prompt) {
        return evaluate_prompt(prompt, dataset, ctx.gw(), ctx.roles.agent, ctx.metric, ctx.parallelism).aggregate;
    }
};

}  // namespace

RefinementOutcome<PromptComponents> refine(const CandidatePrompt& candidate, const Dataset& dataset,
                                           const FeatureSchema& schema, const RefinementParams& params,
                                           const OptimizerContext& ctx) {
    SingleAgentSystem system{dataset, schema, params, ctx};
    return hill_climb(candidate.prompt, candidate.score, dataset, params, system);
}

}  // namespace promptforge
