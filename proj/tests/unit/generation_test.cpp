#include <gtest/gtest.h>

#include <set>

#include "promptforge/generation.hpp"
#include "testkit.hpp"

using namespace promptforge;
using namespace pf_test;

namespace {

FeatureMatrix matrix_for(const Dataset& data, const FeatureSchema& schema = default_schema()) {
    FeatureMatrix m;
    m.dimensions = schema;
    for (const auto& ex : data) {
        FeatureVector v;
        v.example_id = ex.id;
        for (const auto& d : schema) v.values.push_back(d.name + " of " + ex.id);
        m.rows.push_back(std::move(v));
    }
    return m;
}

std::vector<std::size_t> row_indices(const FeatureMatrix& batch) {
    std::vector<std::size_t> out;
    for (const auto& r : batch.rows) out.push_back(static_cast<std::size_t>(last_number(r.example_id)) - 1);
    return out;
}

ScriptRule gen_rule(std::vector<std::string> contains, std::string response) {
    ScriptRule r;
    r.role = Role::generator;
    r.contains = std::move(contains);
    r.response = std::move(response);
    return r;
}

// Union of [k - radius, k + radius] over the batch ids, clipped to 1..n.
double neighborhood_fraction(const std::vector<std::size_t>& rows, int radius, int n) {
    std::set<int> hit;
    for (auto r : rows)
        for (int d = -radius; d <= radius; ++d) {
            int k = static_cast<int>(r) + 1 + d;
            if (k >= 1 && k <= n) hit.insert(k);
        }
    return static_cast<double>(hit.size()) / n;
}

}  // namespace

// Frozen from tests/oracles/sampler.py.
TEST(SampleBatch, MatchesReferenceSampler) {
    auto m = matrix_for(numbered_dataset(10));
    EXPECT_EQ(row_indices(sample_batch(m, 3, 7, 1)), (std::vector<std::size_t>{9, 1, 8}));
    EXPECT_EQ(row_indices(sample_batch(m, 3, 7, 2)), (std::vector<std::size_t>{2, 0, 5}));
    EXPECT_EQ(row_indices(sample_batch(m, 3, 42, 1)), (std::vector<std::size_t>{1, 6, 3}));
    EXPECT_EQ(row_indices(sample_batch(m, 3, 42, 2)), (std::vector<std::size_t>{8, 5, 7}));
    EXPECT_EQ(row_indices(sample_batch(m, 3, 0, 3)), (std::vector<std::size_t>{6, 4, 5}));
    auto m20 = matrix_for(numbered_dataset(20));
    EXPECT_EQ(row_indices(sample_batch(m20, 20, 42, 1)),
              (std::vector<std::size_t>{11, 0, 9, 16, 18, 5, 13, 6, 4, 1, 2, 7, 19, 15, 3, 17, 12, 8, 10, 14}));
}

TEST(SampleBatch, DistinctRowsForEverySizeAndSeed) {
    auto m = matrix_for(numbered_dataset(12));
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        for (std::size_t b = 1; b <= 12; ++b) {
            auto batch = sample_batch(m, b, seed, static_cast<int>(b));
            ASSERT_EQ(batch.n(), b);
            auto idx = row_indices(batch);
            EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), b);
            EXPECT_EQ(batch.dimensions, m.dimensions);
            EXPECT_EQ(batch, sample_batch(m, b, seed, static_cast<int>(b)));
        }
}

TEST(SampleBatch, FullBatchIsAPermutation) {
    auto m = matrix_for(numbered_dataset(6));
    auto batch = sample_batch(m, 6, 3, 1);
    auto idx = row_indices(batch);
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()), (std::set<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(SampleBatch, RejectsOutOfRangeSizes) {
    auto m = matrix_for(numbered_dataset(4));
    EXPECT_THROW(sample_batch(m, 0, 1, 1), BadBatchSize);
    EXPECT_THROW(sample_batch(m, 5, 1, 1), BadBatchSize);
}

TEST(InitializePrompt, OneCallPerColumnWithDemos) {
    auto data = numbered_dataset(5);
    auto batch = sample_batch(matrix_for(data), 3, 42, 1);
    Gateway gw(std::make_shared<ScriptedTransport>(
                   std::vector<ScriptRule>{gen_rule({"Component:"}, "Slot {line:Component}")}),
               quiet_options());
    auto prompt = initialize_prompt(batch, data, gw, default_backend_role(Role::generator), 2);
    ASSERT_EQ(prompt.components.size(), 6u);
    for (const auto& c : prompt.components) EXPECT_EQ(c.text, "Slot " + c.name);
    ASSERT_EQ(prompt.demonstrations.size(), 2u);
    EXPECT_EQ(prompt.demonstrations[0].input, data.find(batch.rows[0].example_id)->input);
    EXPECT_EQ(prompt.demonstrations[1].output, data.find(batch.rows[1].example_id)->output);
    EXPECT_EQ(gw.stats().by_tag["generate.init"], 6);
}

TEST(InitializePrompt, ColumnTextsReachTheGenerator) {
    auto data = numbered_dataset(3);
    auto m = matrix_for(data);
    auto gw = Gateway(ToyWorld{}.transport(), quiet_options());
    auto prompt = initialize_prompt(m, data, gw, default_backend_role(Role::generator), 0);
    EXPECT_EQ(prompt.text("task_intent"), "Guidance for task_intent, covers x01 x02 x03");
    EXPECT_TRUE(prompt.demonstrations.empty());
}

TEST(InitializePrompt, SingleRowBatch) {
    auto data = numbered_dataset(4);
    auto batch = sample_batch(matrix_for(data), 1, 9, 1);
    Gateway gw(ToyWorld{}.transport(), quiet_options());
    auto prompt = initialize_prompt(batch, data, gw, default_backend_role(Role::generator), 4);
    EXPECT_EQ(prompt.text("constraints"), "Guidance for constraints, covers " + batch.rows[0].example_id);
    EXPECT_EQ(prompt.demonstrations.size(), 1u);
}

TEST(InitializePrompt, EmptyColumnReplyNamesTheColumn) {
    auto data = numbered_dataset(2);
    Gateway gw(std::make_shared<ScriptedTransport>(std::vector<ScriptRule>{
                   gen_rule({"Component: output_format"}, ""), gen_rule({"Component:"}, "fine")}),
               quiet_options());
    try {
        initialize_prompt(matrix_for(data), data, gw, default_backend_role(Role::generator), 1);
        FAIL();
    } catch (const GenerationFailed& e) {
        EXPECT_EQ(e.column(), "output_format");
    }
}

TEST(SelfImprovePrompt, IdentityReviseKeepsPrompt) {
    auto prompt = PromptComponents::empty(default_schema());
    for (auto& c : prompt.components) c.text = "text for " + c.name;
    prompt.demonstrations = {{"q", "a"}};
    Gateway gw(std::make_shared<ScriptedTransport>(std::vector<ScriptRule>{
                   gen_rule({"Task: critique prompt components"}, "Too vague."),
                   gen_rule({"Task: revise prompt components"}, "{current}")}),
               quiet_options());
    auto out = self_improve_prompt(prompt, default_schema(), gw, default_backend_role(Role::generator), 1);
    EXPECT_EQ(out.state, prompt);
    EXPECT_EQ(out.rounds, 1);
    EXPECT_EQ(gw.stats().by_role["generator"], 2);
}

TEST(SelfImprovePrompt, ReviseCannotDropDemonstrations) {
    auto prompt = PromptComponents::empty(default_schema());
    for (auto& c : prompt.components) c.text = "t";
    prompt.demonstrations = {{"q", "a"}};
    std::string reply = R"({"components": {"task_intent": "n1", "domain_terminology": "n2", "reasoning_pattern": "n3",
        "input_structure": "n4", "output_format": "n5", "constraints": "n6"}, "demonstrations": []})";
    Gateway gw(std::make_shared<ScriptedTransport>(std::vector<ScriptRule>{
                   gen_rule({"Task: critique prompt components"}, "Rewrite."),
                   gen_rule({"Task: revise prompt components"}, reply)}),
               quiet_options());
    auto out = self_improve_prompt(prompt, default_schema(), gw, default_backend_role(Role::generator), 1);
    EXPECT_EQ(out.state.text("constraints"), "n6");
    EXPECT_EQ(out.state.demonstrations, prompt.demonstrations);
}

TEST(SelfImprovePrompt, WrongSlotCountFails) {
    auto prompt = PromptComponents::empty(default_schema());
    for (auto& c : prompt.components) c.text = "t";
    Gateway gw(std::make_shared<ScriptedTransport>(std::vector<ScriptRule>{
                   gen_rule({"Task: critique prompt components"}, "Rewrite."),
                   gen_rule({"Task: revise prompt components"}, R"({"components": {"task_intent": "x"}})")}),
               quiet_options());
    EXPECT_THROW(self_improve_prompt(prompt, default_schema(), gw, default_backend_role(Role::generator), 1),
                 ImprovementFailed);
}

TEST(SelectBest, HighestScoreThenSmallestBatch) {
    auto make = [](double s, int t) {
        CandidatePrompt c;
        c.score = Score(s);
        c.batch_index = t;
        return c;
    };
    EXPECT_EQ(select_best({make(0.25, 1), make(0.5, 2), make(0.75, 3), make(1.0, 4)}), 3u);
    EXPECT_EQ(select_best({make(0.5, 1), make(0.5, 2)}), 0u);
    EXPECT_EQ(select_best({make(0.2, 3), make(0.9, 2), make(0.9, 1)}), 2u);
    EXPECT_EQ(select_best({make(0.0, 1)}), 0u);
    EXPECT_THROW(select_best({}), Error);
}

TEST(GenerateCandidates, ScoresMatchNeighborhoodOracle) {
    auto data = numbered_dataset(10);
    auto m = matrix_for(data);
    ToyWorld world;
    world.radius = 1;
    Gateway gw(world.transport(), quiet_options());
    auto ctx = toy_context(gw);
    GenerationParams params;
    params.batch_size = 3;
    params.batches = 4;
    params.seed = 42;
    params.demo_cap = 0;
    auto result = generate_candidates(m, params, data, ctx);
    ASSERT_EQ(result.candidates.size(), 4u);

    std::size_t want = 0;
    double best = -1;
    for (int t = 1; t <= 4; ++t) {
        double f = neighborhood_fraction(row_indices(sample_batch(m, 3, 42, t)), 1, 10);
        const auto& c = result.candidates[static_cast<std::size_t>(t - 1)];
        EXPECT_EQ(c.batch_index, t);
        EXPECT_DOUBLE_EQ(c.score.value(), f) << "t=" << t;
        EXPECT_DOUBLE_EQ(result.reports[static_cast<std::size_t>(t - 1)].aggregate.value(), f);
        if (f > best) best = f, want = static_cast<std::size_t>(t - 1);
    }
    EXPECT_EQ(result.best, want);
    EXPECT_EQ(result.best_candidate().score.value(), best);
}

TEST(GenerateCandidates, TiesGoToTheFirstBatch) {
    auto data = numbered_dataset(10);
    Gateway gw(ToyWorld{}.transport(), quiet_options());
    auto ctx = toy_context(gw);
    GenerationParams params;
    params.batch_size = 3;
    params.batches = 3;
    params.demo_cap = 0;
    auto result = generate_candidates(matrix_for(data), params, data, ctx);
    for (const auto& c : result.candidates) EXPECT_DOUBLE_EQ(c.score.value(), 0.3);
    EXPECT_EQ(result.best, 0u);
}

TEST(GenerateCandidates, SingleBatchAndCallCounts) {
    auto data = numbered_dataset(5);
    Gateway gw(ToyWorld{}.transport(), quiet_options());
    auto ctx = toy_context(gw);
    GenerationParams params;
    params.batch_size = 5;
    params.batches = 1;
    auto result = generate_candidates(matrix_for(data), params, data, ctx);
    EXPECT_EQ(result.best, 0u);
    EXPECT_DOUBLE_EQ(result.best_candidate().score.value(), 1.0);
    auto stats = gw.stats();
    EXPECT_EQ(stats.by_tag["generate.init"], 6);
    EXPECT_EQ(stats.by_tag["generate.critique"], 1);
    EXPECT_EQ(stats.by_tag["generate.revise"], 0);
    EXPECT_EQ(stats.by_tag["agent"], 5);
    EXPECT_EQ(result.best_candidate().lineage, (std::vector<LineageEvent>{{LineageKind::initialized, {}}}));
}

TEST(GenerateCandidates, LineageRecordsSelfImprovement) {
    auto data = numbered_dataset(4);
    ToyWorld world;
    world.generator_accepts = false;
    Gateway gw(world.transport(), quiet_options());
    auto ctx = toy_context(gw);
    GenerationParams params;
    params.batch_size = 2;
    params.batches = 2;
    auto result = generate_candidates(matrix_for(data), params, data, ctx);
    for (const auto& c : result.candidates)
        EXPECT_EQ(c.lineage, (std::vector<LineageEvent>{{LineageKind::initialized, {}},
                                                        {LineageKind::self_improved, {}}}));
}

TEST(GenerateCandidates, OnlySlotClearsTheRest) {
    auto data = numbered_dataset(4);
    Gateway gw(ToyWorld{}.transport(), quiet_options());
    auto ctx = toy_context(gw);
    ctx.only_slot = "task_intent";
    GenerationParams params;
    params.batch_size = 2;
    params.batches = 1;
    auto result = generate_candidates(matrix_for(data), params, data, ctx);
    const auto& p = result.best_candidate().prompt;
    EXPECT_FALSE(p.text("task_intent").empty());
    EXPECT_TRUE(p.text("constraints").empty());
    EXPECT_TRUE(p.demonstrations.empty());
}

TEST(GenerateCandidates, IndependentOfParallelism) {
    auto data = numbered_dataset(8);
    std::optional<GenerationResult> reference;
    for (std::size_t p : {1u, 3u, 8u}) {
        ToyWorld world;
        world.radius = 1;
        Gateway gw(world.transport(), quiet_options(p));
        auto ctx = toy_context(gw, MetricType::exact_match, p);
        GenerationParams params;
        params.batch_size = 2;
        params.batches = 5;
        params.seed = 11;
        auto r = generate_candidates(matrix_for(data), params, data, ctx);
        if (!reference) {
            reference = r;
            continue;
        }
        EXPECT_EQ(r.candidates, reference->candidates);
        EXPECT_EQ(r.reports, reference->reports);
        EXPECT_EQ(r.best, reference->best);
    }
}

TEST(GenerateCandidates, RejectsBadParameters) {
    auto data = numbered_dataset(3);
    Gateway gw(ToyWorld{}.transport(), quiet_options());
    auto ctx = toy_context(gw);
    GenerationParams params;
    params.batch_size = 4;
    EXPECT_THROW(generate_candidates(matrix_for(data), params, data, ctx), BadBatchSize);
    params.batch_size = 0;
    EXPECT_THROW(generate_candidates(matrix_for(data), params, data, ctx), BadBatchSize);
}

TEST(GenerateCandidates, FailureNamesTheBatch) {
    auto data = numbered_dataset(3);
    auto script = ToyWorld{}.script();
    script.insert(script.begin(), gen_rule({"Component: constraints"}, ""));
    Gateway gw(std::make_shared<ScriptedTransport>(script), quiet_options());
    auto ctx = toy_context(gw);
    GenerationParams params;
    params.batch_size = 2;
    params.batches = 1;
    try {
        generate_candidates(matrix_for(data), params, data, ctx);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.context(), "batch 1");
        EXPECT_THROW(rethrow_root(e.cause()), GenerationFailed);
    }
}
