#include "promptforge/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <unordered_map>

#include "promptforge/parallel.hpp"
#include "promptforge/pipelines.hpp"
#include "promptforge/prompts.hpp"

namespace promptforge {

std::string_view to_string(MetricType type) {
    switch (type) {
        case MetricType::exact_match: return "exact_match";
        case MetricType::token_f1: return "token_f1";
        case MetricType::judge_relevancy: return "judge_relevancy";
    }
    return "token_f1";
}

std::optional<MetricType> metric_from_string(std::string_view s) {
    if (s == "exact_match") return MetricType::exact_match;
    if (s == "token_f1") return MetricType::token_f1;
    if (s == "judge_relevancy") return MetricType::judge_relevancy;
    return std::nullopt;
}

namespace {

std::vector<std::string> tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace

std::string normalize_text(std::string_view text) {
    std::string out;
    for (const auto& t : tokens(text)) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

Score exact_match(std::string_view predicted, std::string_view gold) {
    return Score(normalize_text(predicted) == normalize_text(gold) ? 1.0 : 0.0);
}

Score token_f1(std::string_view predicted, std::string_view gold) {
    auto p = tokens(predicted);
    auto g = tokens(gold);
    if (p.empty() || g.empty()) return Score(0.0);
    std::unordered_map<std::string, int> gold_counts;
    for (const auto& t : g) ++gold_counts[t];
    std::size_t overlap = 0;
    for (const auto& t : p) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return Score(0.0);
    double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
    return Score(std::clamp(2.0 * precision * recall / (precision + recall), 0.0, 1.0));
}

JudgeVerdict parse_judge_reply(std::string_view reply) {
    auto lines = split_lines(reply);
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) throw JudgeParseFailure(std::string(reply));
    const std::string last = trim(lines.back());
    auto p = last.rfind(prompts::kScoreMarker);
    if (p == std::string::npos) throw JudgeParseFailure(std::string(reply));
    auto number = trim(std::string_view(last).substr(p + prompts::kScoreMarker.size()));
    // <digits>[.<1-3 digits>], optional leading minus (clamped below).
    std::size_t i = 0;
    if (i < number.size() && number[i] == '-') ++i;
    std::size_t int_digits = 0, frac_digits = 0;
    while (i < number.size() && std::isdigit(static_cast<unsigned char>(number[i]))) ++i, ++int_digits;
    if (i < number.size() && number[i] == '.') {
        ++i;
        while (i < number.size() && std::isdigit(static_cast<unsigned char>(number[i]))) ++i, ++frac_digits;
        if (frac_digits == 0) throw JudgeParseFailure(std::string(reply));
    }
    if (int_digits == 0 || i != number.size() || frac_digits > 3) throw JudgeParseFailure(std::string(reply));

    double raw = std::strtod(number.c_str(), nullptr);
    JudgeVerdict v{Score(std::clamp(raw, 0.0, 1.0)), std::nullopt};
    if (raw < 0.0 || raw > 1.0) v.warning = "judge score " + number + " clamped to [0, 1]";
    return v;
}

JudgeVerdict judge_relevancy(std::string_view question, std::string_view answer, std::string_view gold,
                             Gateway& gateway, const BackendRole& judge) {
    BackendRole role = judge;
    role.temperature = 0.0;
    auto reply = gateway.ask(role, prompts::judge_system(), prompts::judge_relevancy(question, answer, gold), "judge");
    return parse_judge_reply(reply);
}

Score score_example(const MetricKind& metric, std::string_view predicted, std::string_view gold,
                    std::string_view question, Gateway& gateway, std::vector<std::string>* warnings) {
    switch (metric.type) {
        case MetricType::exact_match: return exact_match(predicted, gold);
        case MetricType::token_f1: return token_f1(predicted, gold);
        case MetricType::judge_relevancy: {
            if (!metric.judge) throw ConfigError("judge_relevancy metric requires a judge backend");
            auto v = judge_relevancy(question, predicted, gold, gateway, *metric.judge);
            if (v.warning && warnings) warnings->push_back(*v.warning);
            return v.score;
        }
    }
    throw ConfigError("unknown metric");
}

Score mean_score(const std::vector<ExampleResult>& results) {
    if (results.empty()) return Score(0.0);
    double sum = 0.0;
    for (const auto& r : results) sum += r.score.value();
    return Score(std::clamp(sum / static_cast<double>(results.size()), 0.0, 1.0));
}

EvaluationReport evaluate_answers(const Dataset& dataset, const AnswerFn& answer, const MetricKind& metric,
                                  Gateway& gateway, std::size_t parallelism) {
    EvaluationReport report;
    report.metric = metric;
    report.per_example = parallel_map(dataset.size(), parallelism, [&](std::size_t i) {
        const auto& ex = dataset[i];
        ExampleResult r;
        r.example_id = ex.id;
        try {
            r.answer = answer(ex);
        } catch (const std::exception& e) {
            r.flagged = true;
            r.note = std::string("agent failed: ") + e.what();
            return r;
        }
        try {
            std::vector<std::string> warnings;
            r.score = score_example(metric, r.answer, ex.output, ex.input, gateway, &warnings);
            if (!warnings.empty()) r.note = warnings.front();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            r.flagged = true;
            r.score = Score(0.0);
            r.note = std::string("scoring failed: ") + e.what();
        }
        return r;
    });
    report.aggregate = mean_score(report.per_example);
    return report;
}

EvaluationReport evaluate_prompt(const PromptComponents& prompt, const Dataset& dataset, Gateway& gateway,
                                 const BackendRole& agent, const MetricKind& metric, std::size_t parallelism) {
    return evaluate_answers(
        dataset, [&](const Example& ex) { return run_agent(prompt, ex.input, gateway, agent); }, metric, gateway,
        parallelism);
}

}  // namespace promptforge
