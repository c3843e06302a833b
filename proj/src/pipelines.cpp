#include "promptforge/pipelines.hpp"

#include <algorithm>
#include <charconv>
#include <vector>

#include "promptforge/error.hpp"
#include "promptforge/parallel.hpp"
#include "promptforge/prompts.hpp"

namespace promptforge {

std::string run_agent(const PromptComponents& prompt, std::string_view input, Gateway& gateway,
                      const BackendRole& agent) {
    return gateway.ask(agent, {}, render_prompt(prompt, input), "agent");
}

std::string_view to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::cot: return "cot";
        case BaselineKind::sequential_cot: return "sequential_cot";
        case BaselineKind::self_consistency_cot: return "self_consistency_cot";
    }
    return "cot";
}

std::string_view display_name(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::cot: return "CoT";
        case BaselineKind::sequential_cot: return "Sequential CoT";
        case BaselineKind::self_consistency_cot: return "Self-Consistency CoT";
    }
    return "CoT";
}

std::optional<BaselineKind> baseline_from_string(std::string_view s) {
    if (s == "cot") return BaselineKind::cot;
    if (s == "sequential_cot") return BaselineKind::sequential_cot;
    if (s == "self_consistency_cot") return BaselineKind::self_consistency_cot;
    return std::nullopt;
}

std::size_t parse_selection(std::string_view reply, std::size_t candidates) {
    auto p = reply.rfind(prompts::kSelectedMarker);
    if (p == std::string_view::npos) throw SelectionFailed("selector reply has no SELECTED line");
    auto rest = trim(reply.substr(p + prompts::kSelectedMarker.size()));
    std::size_t n = 0;
    auto [end, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), n);
    if (ec != std::errc{} || n < 1 || n > candidates)
        throw SelectionFailed("selector chose '" + rest + "', expected 1.." + std::to_string(candidates));
    return n;
}

std::string run_baseline(BaselineKind kind, std::string_view input, Gateway& gateway,
                         const BaselineOptions& options) {
    switch (kind) {
        case BaselineKind::cot:
            return prompts::final_answer(
                gateway.ask(options.agent, {}, prompts::cot(options.instruction, input), "baseline.cot"));

        case BaselineKind::sequential_cot: {
            auto draft = gateway.ask(options.agent, {}, prompts::sequential_draft(options.instruction, input),
                                     "baseline.sequential.draft");
            return prompts::final_answer(gateway.ask(
                options.agent, {}, prompts::sequential_answer(options.instruction, input, draft),
                "baseline.sequential.answer"));
        }

        case BaselineKind::self_consistency_cot: {
            if (options.k < 1) throw ConfigError("self-consistency needs k >= 1");
            BackendRole sampler = options.agent;
            sampler.temperature = std::max(options.sample_temperature, 1e-3);
            auto prompt = prompts::cot(options.instruction, input);
            auto answers = parallel_map(static_cast<std::size_t>(options.k), options.parallelism, [&](std::size_t i) {
                return prompts::final_answer(gateway.ask(sampler, {}, prompt, "baseline.sc.sample",
                                                         options.seed + static_cast<std::int64_t>(i)));
            });
            auto reply = gateway.ask(options.selector, {}, prompts::select_consistent(input, answers),
                                     "baseline.sc.select");
            return answers[parse_selection(reply, answers.size()) - 1];
        }
    }
    throw ConfigError("unknown baseline");
}

}  // namespace promptforge
