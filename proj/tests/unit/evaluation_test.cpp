#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "promptforge/evaluation.hpp"
#include "testkit.hpp"

using namespace promptforge;
using namespace pf_test;

namespace {

// Multiset overlap via sorted merge, lowercase split on spaces.
double f1_oracle(const std::string& predicted, const std::string& gold) {
    auto toks = [](const std::string& s) {
        std::istringstream in(s);
        std::vector<std::string> out;
        for (std::string w; in >> w;) {
            std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return std::tolower(c); });
            out.push_back(w);
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    auto p = toks(predicted), g = toks(gold);
    if (p.empty() || g.empty()) return 0.0;
    std::vector<std::string> common;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(common));
    if (common.empty()) return 0.0;
    double prec = static_cast<double>(common.size()) / p.size();
    double rec = static_cast<double>(common.size()) / g.size();
    return 2 * prec * rec / (prec + rec);
}

std::string random_sentence(std::mt19937_64& rng) {
    static const char* words[] = {"the", "The", "cat", "sat", "on", "mat", "a", "A", "dog", "ran"};
    std::string s;
    auto n = rng() % 7;
    for (std::size_t i = 0; i < n; ++i) {
        s += words[rng() % 10];
        s += (rng() % 3 == 0) ? "  " : (rng() % 5 == 0 ? "\t" : " ");
    }
    return s;
}

ScriptRule judge_rule(std::string response) {
    ScriptRule r;
    r.role = Role::judge;
    r.response = std::move(response);
    return r;
}

}  // namespace

TEST(Metrics, ExactMatchNormalizes) {
    EXPECT_EQ(exact_match("  Hello   World ", "hello world"), Score(1.0));
    EXPECT_EQ(exact_match("hello\tworld\n", "Hello World"), Score(1.0));
    EXPECT_EQ(exact_match("hello world.", "hello world"), Score(0.0));
    EXPECT_EQ(exact_match("", ""), Score(1.0));
    EXPECT_EQ(normalize_text("  A  b\nC "), "a b c");
}

TEST(Metrics, TokenF1KnownValues) {
    EXPECT_DOUBLE_EQ(token_f1("the cat sat", "the cat").value(), 0.8);
    EXPECT_DOUBLE_EQ(token_f1("the the", "the").value(), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(token_f1("a b c d", "a b c d").value(), 1.0);
    EXPECT_DOUBLE_EQ(token_f1("x y", "z").value(), 0.0);
    EXPECT_DOUBLE_EQ(token_f1("", "gold").value(), 0.0);
    EXPECT_DOUBLE_EQ(token_f1("pred", "   ").value(), 0.0);
    EXPECT_DOUBLE_EQ(token_f1("Open THE account", "open the Account now").value(), 2 * 1.0 * 0.75 / 1.75);
}

TEST(Metrics, TokenF1MatchesOracleAndIsSymmetric) {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 2000; ++i) {
        auto a = random_sentence(rng), b = random_sentence(rng);
        double f = token_f1(a, b).value();
        EXPECT_NEAR(f, f1_oracle(a, b), 1e-12) << "'" << a << "' vs '" << b << "'";
        EXPECT_DOUBLE_EQ(f, token_f1(b, a).value());
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, 1.0);
        if (!normalize_text(a).empty()) EXPECT_DOUBLE_EQ(token_f1(a, a).value(), 1.0);
    }
}

TEST(Metrics, Names) {
    for (auto t : {MetricType::exact_match, MetricType::token_f1, MetricType::judge_relevancy})
        EXPECT_EQ(metric_from_string(to_string(t)), t);
    EXPECT_FALSE(metric_from_string("bleu"));
}

TEST(JudgeParse, ReadsTrailingScore) {
    EXPECT_DOUBLE_EQ(parse_judge_reply("Looks right.\nSCORE: 0.8").score.value(), 0.8);
    EXPECT_DOUBLE_EQ(parse_judge_reply("SCORE: 1\n\n").score.value(), 1.0);
    EXPECT_DOUBLE_EQ(parse_judge_reply("ok\nSCORE: 0.125").score.value(), 0.125);
    EXPECT_FALSE(parse_judge_reply("SCORE: 0.5").warning);
}

TEST(JudgeParse, ClampsWithWarning) {
    auto high = parse_judge_reply("Great.\nSCORE: 1.7");
    EXPECT_DOUBLE_EQ(high.score.value(), 1.0);
    ASSERT_TRUE(high.warning);
    EXPECT_NE(high.warning->find("1.7"), std::string::npos);
    auto low = parse_judge_reply("SCORE: -0.2");
    EXPECT_DOUBLE_EQ(low.score.value(), 0.0);
    EXPECT_TRUE(low.warning);
}

TEST(JudgeParse, RejectsMalformedReplies) {
    for (const char* bad : {"", "no score here", "SCORE: 0.8\nthen more text", "SCORE: high", "SCORE: 0.1234",
                            "SCORE: .5", "SCORE: 1.", "SCORE:"}) {
        try {
            parse_judge_reply(bad);
            ADD_FAILURE() << bad;
        } catch (const JudgeParseFailure& e) {
            EXPECT_EQ(e.raw(), bad);
        }
    }
}

TEST(JudgeRelevancy, UsesZeroTemperature) {
    std::optional<double> seen;
    ScriptRule r;
    r.role = Role::judge;
    r.responder = [&](const ChatRequest& req) {
        seen = req.role.temperature;
        return std::string("fine\nSCORE: 0.6");
    };
    Gateway gw(std::make_shared<ScriptedTransport>(std::vector<ScriptRule>{r}), quiet_options());
    auto judge = default_backend_role(Role::judge);
    judge.temperature = 0.9;
    auto v = judge_relevancy("q", "a", "g", gw, judge);
    EXPECT_DOUBLE_EQ(v.score.value(), 0.6);
    EXPECT_EQ(seen, 0.0);
    EXPECT_EQ(gw.stats().by_tag["judge"], 1);
}

TEST(ScoreExample, JudgeNeedsARole) {
    Gateway gw(ToyWorld{}.transport(), quiet_options());
    MetricKind m{MetricType::judge_relevancy, std::nullopt};
    EXPECT_THROW(score_example(m, "a", "b", "q", gw), ConfigError);
}

TEST(MeanScore, ArithmeticMean) {
    auto r = [](double s) {
        ExampleResult e;
        e.score = Score(s);
        return e;
    };
    EXPECT_DOUBLE_EQ(mean_score({r(1), r(1), r(1), r(1)}).value(), 1.0);
    EXPECT_DOUBLE_EQ(mean_score({r(1), r(1), r(1), r(0)}).value(), 0.75);
    EXPECT_DOUBLE_EQ(mean_score({}).value(), 0.0);
}

TEST(EvaluatePrompt, PerfectAndPartialPrompts) {
    auto data = numbered_dataset(4);
    Gateway gw(ToyWorld{}.transport(), quiet_options());
    auto prompt = PromptComponents::empty(default_schema());
    prompt.set("task_intent", "covers x01 x02 x03 x04");
    auto metric = MetricKind{MetricType::exact_match, std::nullopt};
    auto full = evaluate_prompt(prompt, data, gw, default_backend_role(Role::agent), metric, 4);
    EXPECT_DOUBLE_EQ(full.aggregate.value(), 1.0);
    ASSERT_EQ(full.per_example.size(), 4u);
    EXPECT_EQ(full.per_example[2].example_id, "x03");
    EXPECT_EQ(full.per_example[2].answer, "answer 3");

    prompt.set("task_intent", "covers x01 x02 x04");
    auto partial = evaluate_prompt(prompt, data, gw, default_backend_role(Role::agent), metric, 4);
    EXPECT_DOUBLE_EQ(partial.aggregate.value(), 0.75);
    EXPECT_EQ(partial.per_example[2].score, Score(0.0));
    EXPECT_FALSE(partial.per_example[2].flagged);
    EXPECT_EQ(partial.metric, metric);
}

TEST(EvaluatePrompt, TokenF1AggregatesPartialCredit) {
    auto data = numbered_dataset(2);
    Gateway gw(ToyWorld{}.transport(), quiet_options());
    auto prompt = PromptComponents::empty(default_schema());
    prompt.set("task_intent", "covers x01");
    auto report = evaluate_prompt(prompt, data, gw, default_backend_role(Role::agent),
                                  MetricKind{MetricType::token_f1, std::nullopt}, 2);
    // "answer 1" exact; "no idea" vs "answer 2" shares nothing.
    EXPECT_DOUBLE_EQ(report.aggregate.value(), 0.5);
}

TEST(EvaluatePrompt, JudgeMetricAveragesVerdicts) {
    auto data = numbered_dataset(4);
    Gateway gw(ToyWorld{}.transport(), quiet_options());
    auto prompt = PromptComponents::empty(default_schema());
    prompt.set("task_intent", "covers x01 x03");
    MetricKind m{MetricType::judge_relevancy, default_backend_role(Role::judge)};
    auto report = evaluate_prompt(prompt, data, gw, default_backend_role(Role::agent), m, 4);
    EXPECT_DOUBLE_EQ(report.aggregate.value(), 0.5);
    EXPECT_EQ(gw.stats().by_tag["judge"], 4);
}

TEST(EvaluatePrompt, FailuresAreFlaggedAsZero) {
    auto data = numbered_dataset(4);
    auto script = ToyWorld{}.script();
    ScriptRule broken;
    broken.role = Role::agent;
    broken.contains = {"Input:\nquestion 2"};
    broken.response = "x";
    broken.fail_times = 1000;
    script.insert(script.begin(), broken);
    ScriptRule unparsable = judge_rule("no verdict");
    unparsable.contains = {"Reference answer:\nanswer 3"};
    script.insert(script.begin(), unparsable);
    Gateway gw(std::make_shared<ScriptedTransport>(script), quiet_options());
    auto prompt = PromptComponents::empty(default_schema());
    prompt.set("task_intent", "covers x01 x02 x03 x04");
    MetricKind m{MetricType::judge_relevancy, default_backend_role(Role::judge)};
    auto report = evaluate_prompt(prompt, data, gw, default_backend_role(Role::agent), m, 4);
    EXPECT_TRUE(report.per_example[1].flagged);
    EXPECT_NE(report.per_example[1].note.find("agent failed"), std::string::npos);
    EXPECT_TRUE(report.per_example[2].flagged);
    EXPECT_NE(report.per_example[2].note.find("scoring failed"), std::string::npos);
    EXPECT_FALSE(report.per_example[0].flagged);
    EXPECT_DOUBLE_EQ(report.aggregate.value(), 0.5);
}

TEST(EvaluatePrompt, ClampWarningIsNoted) {
    auto data = numbered_dataset(1);
    std::vector<ScriptRule> script{judge_rule("too good\nSCORE: 2.5")};
    auto toy = ToyWorld{}.script();
    script.insert(script.end(), toy.begin(), toy.end());
    Gateway gw(std::make_shared<ScriptedTransport>(script), quiet_options());
    MetricKind m{MetricType::judge_relevancy, default_backend_role(Role::judge)};
    auto report = evaluate_prompt(PromptComponents::empty(default_schema()), data, gw,
                                  default_backend_role(Role::agent), m, 1);
    EXPECT_DOUBLE_EQ(report.aggregate.value(), 1.0);
    EXPECT_FALSE(report.per_example[0].flagged);
    EXPECT_NE(report.per_example[0].note.find("clamped"), std::string::npos);
}

TEST(EvaluateAnswers, AggregateStaysInRange) {
    std::mt19937_64 rng(5);
    for (int run = 0; run < 50; ++run) {
        auto data = numbered_dataset(1 + rng() % 9);
        Gateway gw(ToyWorld{}.transport(), quiet_options());
        std::vector<std::string> answers;
        for (std::size_t i = 0; i < data.size(); ++i) answers.push_back(random_sentence(rng) + " answer");
        auto report = evaluate_answers(
            data, [&](const Example& ex) { return answers[static_cast<std::size_t>(last_number(ex.id) - 1)]; },
            MetricKind{MetricType::token_f1, std::nullopt}, gw, 3);
        double sum = 0;
        for (std::size_t i = 0; i < data.size(); ++i) sum += f1_oracle(answers[i], data[i].output);
        EXPECT_NEAR(report.aggregate.value(), sum / data.size(), 1e-12);
        EXPECT_GE(report.aggregate.value(), 0.0);
        EXPECT_LE(report.aggregate.value(), 1.0);
    }
}
