#include "promptforge/generation.hpp"

#include <limits>
#include <numeric>
#include <random>

#include "promptforge/parallel.hpp"
#include "promptforge/prompts.hpp"

namespace promptforge {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform draw in [0, n). std::uniform_int_distribution is not specified
// bit-for-bit across standard libraries, so fixtures would not be portable.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    for (;;) {
        std::uint64_t x = rng();
        if (x < limit) return x % n;
    }
}

}  // namespace

FeatureMatrix sample_batch(const FeatureMatrix& matrix, std::size_t batch_size, std::uint64_t seed, int t) {
    const std::size_t n = matrix.n();
    if (batch_size < 1 || batch_size > n)
        throw BadBatchSize("batch size " + std::to_string(batch_size) + " outside [1, " + std::to_string(n) + "]");

    std::mt19937_64 rng(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < batch_size; ++i) {
        auto j = i + static_cast<std::size_t>(bounded(rng, n - i));
        std::swap(order[i], order[j]);
    }

    FeatureMatrix batch;
    batch.dimensions = matrix.dimensions;
    batch.rows.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) batch.rows.push_back(matrix.rows[order[i]]);
    return batch;
}

PromptComponents initialize_prompt(const FeatureMatrix& batch, const Dataset& dataset, Gateway& gateway,
                                   const BackendRole& generator, std::size_t demo_cap) {
    PromptComponents prompt = PromptComponents::empty(batch.dimensions);
    std::vector<std::string> ids;
    for (const auto& row : batch.rows) ids.push_back(row.example_id);

    const auto system = prompts::generator_system();
    for (std::size_t col = 0; col < batch.l(); ++col) {
        const auto& dim = batch.dimensions[col];
        std::vector<std::string> column;
        for (const auto& row : batch.rows) column.push_back(row.values.at(col));
        std::string text;
        try {
            text = trim(gateway.ask(generator, system, prompts::initialize_component(dim, ids, column),
                                    "generate.init"));
        } catch (const std::exception& e) {
            throw GenerationFailed(dim.name, e.what());
        }
        if (text.empty()) throw GenerationFailed(dim.name, "empty reply");
        prompt.components[col].text = std::move(text);
    }

    for (const auto& id : ids) {
        if (prompt.demonstrations.size() >= demo_cap) break;
        const Example* ex = dataset.find(id);
        if (!ex) throw MissingRow(id);
        prompt.demonstrations.push_back({ex->input, ex->output});
    }
    return prompt;
}

Improved<PromptComponents> self_improve_prompt(PromptComponents prompt, const FeatureSchema& schema,
                                               Gateway& gateway, const BackendRole& generator, int rounds,
                                               const std::string& tag) {
    if (rounds < 1) throw ConfigError("prompt self-improvement needs at least one round");
    if (!prompt.has_schema(schema)) throw SchemaViolation("prompt slots do not match the feature schema");

    CritiqueRevise spec{
        generator,
        prompts::generator_system(),
        tag,
        [&](const std::string& current) { return prompts::critique_prompt(schema, current); },
        [&](const std::string& current, const std::string& critique) {
            return prompts::revise_prompt(schema, current, critique);
        },
    };
    return critique_and_revise(
        gateway, spec, std::move(prompt), rounds, [](const PromptComponents& p) { return prompts::encode_prompt(p); },
        [&](const std::string& reply, const PromptComponents& current) {
            auto decoded = prompts::decode_prompt(reply, schema);
            PromptComponents next = current;
            for (std::size_t i = 0; i < schema.size(); ++i) next.components[i].text = decoded.components[i];
            return next;
        });
}

std::size_t select_best(const std::vector<CandidatePrompt>& candidates) {
    if (candidates.empty()) throw Error("no candidates to select from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const auto& b = candidates[best];
        if (c.score > b.score || (c.score == b.score && c.batch_index < b.batch_index)) best = i;
    }
    return best;
}

GenerationResult generate_candidates(const FeatureMatrix& matrix, const GenerationParams& params,
                                     const Dataset& dataset, const OptimizerContext& ctx) {
    if (params.batches < 1) throw ConfigError("number of batches must be at least 1");
    if (params.batch_size < 1 || params.batch_size > matrix.n())
        throw BadBatchSize("batch size " + std::to_string(params.batch_size) + " outside [1, " +
                           std::to_string(matrix.n()) + "]");

    struct Built {
        CandidatePrompt candidate;
        EvaluationReport report;
    };
    auto built = parallel_map(static_cast<std::size_t>(params.batches), ctx.parallelism, [&](std::size_t i) {
        const int t = static_cast<int>(i) + 1;
        return with_context("batch " + std::to_string(t), [&] {
            Built b;
            b.candidate.batch_index = t;
            auto batch = sample_batch(matrix, params.batch_size, params.seed, t);
            auto prompt = initialize_prompt(batch, dataset, ctx.gw(), ctx.roles.generator, params.demo_cap);
            b.candidate.lineage.push_back({LineageKind::initialized, {}});
            auto improved = self_improve_prompt(std::move(prompt), matrix.dimensions, ctx.gw(), ctx.roles.generator,
                                                params.improve_rounds);
            if (improved.rounds > 0) b.candidate.lineage.push_back({LineageKind::self_improved, {}});
            b.candidate.prompt = restrict_to_slot(std::move(improved.state), ctx.only_slot);
            b.report = evaluate_prompt(b.candidate.prompt, dataset, ctx.gw(), ctx.roles.agent, ctx.metric,
                                       ctx.parallelism);
            b.candidate.score = b.report.aggregate;
            return b;
        });
    });

    GenerationResult result;
    for (auto& b : built) {
        result.candidates.push_back(std::move(b.candidate));
        result.reports.push_back(std::move(b.report));
    }
    result.best = select_best(result.candidates);
    return result;
}

}  // namespace promptforge
