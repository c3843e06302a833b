#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptforge/core.hpp"
#include "promptforge/gateway.hpp"

namespace promptforge {

enum class MetricType { exact_match, token_f1, judge_relevancy };

std::string_view to_string(MetricType type);
std::optional<MetricType> metric_from_string(std::string_view s);

struct MetricKind {
    MetricType type = MetricType::token_f1;
    std::optional<BackendRole> judge;  // required for judge_relevancy

    bool operator==(const MetricKind&) const = default;
};

// Casefolded (ASCII), whitespace-collapsed, trimmed.
std::string normalize_text(std::string_view text);

Score exact_match(std::string_view predicted, std::string_view gold);

// Harmonic mean of unigram precision and recall over normalized tokens, with
// multiset overlap. 0 when either side has no tokens.
Score token_f1(std::string_view predicted, std::string_view gold);

struct JudgeVerdict {
    Score score;
    std::optional<std::string> warning;  // set when the raw value was clamped
};

// Reads the value on the trailing "SCORE: <v>" line. Throws JudgeParseFailure.
JudgeVerdict parse_judge_reply(std::string_view reply);

JudgeVerdict judge_relevancy(std::string_view question, std::string_view answer, std::string_view gold,
                             Gateway& gateway, const BackendRole& judge);

// mu(predicted, gold). `gateway` is only used by judge_relevancy. Clamp
// warnings are appended to `warnings` when given.
Score score_example(const MetricKind& metric, std::string_view predicted, std::string_view gold,
                    std::string_view question, Gateway& gateway, std::vector<std::string>* warnings = nullptr);

struct ExampleResult {
    std::string example_id;
    std::string answer;
    Score score;
    bool flagged = false;  // the agent or judge call failed; score forced to 0
    std::string note;

    bool operator==(const ExampleResult&) const = default;
};

struct EvaluationReport {
    std::vector<ExampleResult> per_example;  // dataset order
    Score aggregate;
    MetricKind metric;

    bool operator==(const EvaluationReport&) const = default;
};

// Arithmetic mean in index order, clamped to [0, 1].
Score mean_score(const std::vector<ExampleResult>& results);

using AnswerFn = std::function<std::string(const Example&)>;

// Produces an answer per example with `answer`, scores it and aggregates.
// Backend failures (agent or judge) and judge parse failures flag the example
// with score 0 instead of aborting.
EvaluationReport evaluate_answers(const Dataset& dataset, const AnswerFn& answer, const MetricKind& metric,
                                  Gateway& gateway, std::size_t parallelism);

// The objective for one prompt: mean of mu(run_agent(prompt, x), y) over the dataset.
EvaluationReport evaluate_prompt(const PromptComponents& prompt, const Dataset& dataset, Gateway& gateway,
                                 const BackendRole& agent, const MetricKind& metric, std::size_t parallelism);

}  // namespace promptforge
