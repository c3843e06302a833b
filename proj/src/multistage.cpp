#include "promptforge/multistage.hpp"

#include <mutex>
#include <unordered_set>

#include "promptforge/parallel.hpp"
#include "promptforge/pipelines.hpp"
#include "promptforge/prompts.hpp"

namespace promptforge {

void validate_chain(const ChainSpec& spec) {
    if (spec.stages.size() < 2)
        throw InvalidChain("a chain needs at least 2 stages, got " + std::to_string(spec.stages.size()));
    std::unordered_set<std::string> names;
    for (const auto& s : spec.stages) {
        if (s.name.empty()) throw InvalidChain("stage with empty name");
        if (!names.insert(s.name).second) throw InvalidChain("duplicate stage name '" + s.name + "'");
        validate_schema(s.schema);
    }
}

ChainSpec load_chain(const std::filesystem::path& path) {
    Json j = Json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw InvalidChain("'" + path.string() + "' is not a JSON object");
    auto base = path.parent_path();
    ChainSpec spec;
    try {
        for (const auto& s : j.at("stages")) {
            ChainStage stage;
            stage.name = s.at("name").get<std::string>();
            if (s.contains("schema")) stage.schema = schema_from_json(s.at("schema"));
            stage.dataset = load_dataset(base / s.at("dataset").get<std::string>());
            spec.stages.push_back(std::move(stage));
        }
        spec.end_to_end = load_dataset(base / j.at("end_to_end_dataset").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw InvalidChain(std::string("malformed chain spec: ") + e.what());
    }
    validate_chain(spec);
    return spec;
}

std::vector<std::string> run_chain(const std::vector<PromptComponents>& prompts, std::string_view input,
                                   Gateway& gateway, const BackendRole& agent) {
    std::vector<std::string> outputs;
    outputs.reserve(prompts.size());
    std::string current(input);
    for (const auto& p : prompts) {
        current = run_agent(p, current, gateway, agent);
        outputs.push_back(current);
    }
    return outputs;
}

std::optional<std::size_t> parse_stage(std::string_view reply, const std::vector<std::string>& names) {
    auto p = reply.rfind(prompts::kStageMarker);
    if (p == std::string_view::npos) return std::nullopt;
    auto rest = reply.substr(p + prompts::kStageMarker.size());
    auto name = trim(rest.substr(0, rest.find('\n')));
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    return std::nullopt;
}

namespace {

using ChainState = std::vector<PromptComponents>;

struct ChainSystem {
    const ChainSpec& spec;
    const PipelineParams& params;
    const OptimizerContext& ctx;
    std::vector<std::string> names;
    std::vector<std::string>& warnings;
    std::mutex& warnings_mutex;

    Probe probe(const ChainState& state, const Example& ex) {
        auto outputs = run_chain(state, ex.input, ctx.gw(), ctx.roles.agent);
        Score mu;
        try {
            mu = score_example(ctx.metric, outputs.back(), ex.output, ex.input, ctx.gw());
        } catch (const JudgeParseFailure&) {
            mu = Score(0.0);
        }
        return {outputs.back(), mu};
    }

    ChainState repair(const ChainState& state, const Example& ex, const std::string&, std::vector<std::string>& touched) {
        auto outputs = run_chain(state, ex.input, ctx.gw(), ctx.roles.agent);
        auto reply = ctx.gw().ask(ctx.roles.generator, prompts::generator_system(),
                                  prompts::attribute_fault(ex.input, ex.output, names, outputs), "chain.attribute");
        std::size_t stage = names.size() - 1;
        if (auto parsed = parse_stage(reply, names)) {
            stage = *parsed;
        } else {
            std::lock_guard lock(warnings_mutex);
            warnings.push_back("example " + ex.id + ": fault attribution unparsable, repairing final stage");
        }
        const auto& schema = spec.stages[stage].schema;
        Example local{ex.id, stage == 0 ? ex.input : outputs[stage - 1], ex.output};
        ChainState next = state;
        auto repaired = repair_example(state[stage], local, outputs[stage], schema, ctx.gw(), ctx.roles.generator,
                                       params.refinement.demo_cap);
        auto improved = self_improve_prompt(std::move(repaired), schema, ctx.gw(), ctx.roles.generator,
                                            params.refinement.improve_rounds, "refine");
        next[stage] = restrict_to_slot(std::move(improved.state), ctx.only_slot);
        if (touched.empty() || touched.back() != names[stage]) touched.push_back(names[stage]);
        return next;
    }

    Score aggregate(const ChainState& state) {
        return evaluate_answers(
                   spec.end_to_end,
                   [&](const Example& ex) { return run_chain(state, ex.input, ctx.gw(), ctx.roles.agent).back(); },
                   ctx.metric, ctx.gw(), ctx.parallelism)
            .aggregate;
    }
};

}  // namespace

ChainResult optimize_chain(const ChainSpec& spec, const PipelineParams& params, const OptimizerContext& ctx,
                           const std::optional<std::filesystem::path>& run_dir) {
    validate_chain(spec);

    auto phase1 = parallel_map(spec.stages.size(), ctx.parallelism, [&](std::size_t i) {
        const auto& stage = spec.stages[i];
        return with_context("stage " + stage.name, [&] {
            PipelineParams stage_params = params;
            stage_params.schema = stage.schema;
            std::optional<std::filesystem::path> dir;
            if (run_dir) dir = *run_dir / "stages" / stage.name;
            if (dir) std::filesystem::create_directories(*dir);
            auto outcome = run_pipeline(stage.dataset, stage_params, ctx, dir);
            return StageResult{stage.name, outcome.refined->optimized.prompt, outcome.refined->optimized.score};
        });
    });

    ChainResult result;
    result.stages = phase1;
    ChainState state;
    std::vector<std::string> names;
    for (const auto& s : phase1) {
        state.push_back(s.prompt);
        names.push_back(s.name);
    }

    std::mutex warnings_mutex;
    ChainSystem system{spec, params, ctx, names, result.warnings, warnings_mutex};
    result.initial_score = with_context("chain", [&] { return system.aggregate(state); });
    auto outcome = with_context("chain", [&] {
        return hill_climb(std::move(state), result.initial_score, spec.end_to_end, params.refinement, system);
    });
    for (std::size_t i = 0; i < result.stages.size(); ++i) result.stages[i].prompt = outcome.state[i];
    result.score = outcome.score;
    result.trace = std::move(outcome.trace);
    return result;
}

}  // namespace promptforge
