#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "promptforge/core.hpp"

// Fixed instruction templates sent to the extractor, generator and judge
// roles, and the parsers for their replies. Structured state travels inside
// a "BEGIN CURRENT" / "END CURRENT" block so a model (or a scripted backend)
// can echo it back unchanged.
namespace promptforge::prompts {

inline constexpr std::string_view kBeginCurrent = "BEGIN CURRENT";
inline constexpr std::string_view kEndCurrent = "END CURRENT";
inline constexpr std::string_view kScoreMarker = "SCORE:";
inline constexpr std::string_view kSelectedMarker = "SELECTED:";
inline constexpr std::string_view kStageMarker = "STAGE:";

// --- extraction ---
std::string extractor_system();
std::string extract_dimension(const FeatureDimension& dim, const Example& example);
std::string critique_features(const FeatureSchema& schema, const Example& example, const std::string& current);
std::string revise_features(const FeatureSchema& schema, const Example& example, const std::string& current,
                            const std::string& critique);

// --- generation ---
std::string generator_system();
std::string initialize_component(const FeatureDimension& dim, const std::vector<std::string>& example_ids,
                                 const std::vector<std::string>& column);
std::string critique_prompt(const FeatureSchema& schema, const std::string& current);
std::string revise_prompt(const FeatureSchema& schema, const std::string& current, const std::string& critique);
std::string repair_prompt(const FeatureSchema& schema, const Example& example, std::string_view agent_answer,
                          std::size_t demo_cap, const std::string& current);

// --- evaluation / baselines / chains ---
std::string judge_system();
std::string judge_relevancy(std::string_view question, std::string_view answer, std::string_view gold);
std::string cot(std::string_view instruction, std::string_view input);
std::string sequential_draft(std::string_view instruction, std::string_view input);
std::string sequential_answer(std::string_view instruction, std::string_view input, std::string_view draft);
std::string select_consistent(std::string_view input, const std::vector<std::string>& answers);
std::string attribute_fault(std::string_view chain_input, std::string_view gold,
                            const std::vector<std::string>& stage_names,
                            const std::vector<std::string>& stage_outputs);

// A critique reply starting with this token means "nothing to fix".
bool critique_accepts(std::string_view critique);

// --- structured state encoding ---

// {"<dim>": "<text>", ...} in schema order.
std::string encode_values(const FeatureSchema& schema, const std::vector<std::string>& values);
// {"components": {...}, "demonstrations": [{"input":..., "output":...}]}
std::string encode_prompt(const PromptComponents& prompt);

// Reads a map of schema name -> text from the first '{' .. last '}' of the
// reply. Accepts a flat object or one nested under "components" or
// "values". Throws SchemaViolation unless exactly the schema's keys are
// present with string values (nonempty for decode_values).
std::vector<std::string> decode_values(std::string_view reply, const FeatureSchema& schema);

struct DecodedPrompt {
    std::vector<std::string> components;
    bool has_demonstrations = false;
    std::vector<Demonstration> demonstrations;
};
DecodedPrompt decode_prompt(std::string_view reply, const FeatureSchema& schema);

// Text after the final "Answer:" marker, or the whole reply trimmed.
std::string final_answer(std::string_view reply);

}  // namespace promptforge::prompts
