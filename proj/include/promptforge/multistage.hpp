#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "promptforge/optimizer.hpp"

namespace promptforge {

struct ChainStage {
    std::string name;
    FeatureSchema schema = default_schema();
    Dataset dataset;  // gold pairs for this stage alone
};

// A linear chain: stage s+1 consumes the output of stage s.
struct ChainSpec {
    std::vector<ChainStage> stages;
    Dataset end_to_end;  // (chain input, final gold output)
};

// Throws InvalidChain for fewer than two stages or duplicate/empty names.
void validate_chain(const ChainSpec& spec);

// Loads chain.json: {"stages": [{"name", "dataset", "schema"?}], "end_to_end_dataset"}.
// Dataset paths are resolved relative to the file.
ChainSpec load_chain(const std::filesystem::path& path);

// Outputs of every stage for one chain input, in stage order.
std::vector<std::string> run_chain(const std::vector<PromptComponents>& prompts, std::string_view input,
                                   Gateway& gateway, const BackendRole& agent);

// Name of the stage blamed in a "STAGE: <name>" reply; nullopt when absent
// or unknown.
std::optional<std::size_t> parse_stage(std::string_view reply, const std::vector<std::string>& names);

struct StageResult {
    std::string name;
    PromptComponents prompt;
    Score stage_score;  // on the stage's own dataset, after phase 1
};

struct ChainResult {
    std::vector<StageResult> stages;
    Score initial_score;  // end to end, after phase 1
    Score score;          // end to end, after phase 2
    RefinementTrace trace;
    std::vector<std::string> warnings;
};

// Phase 1 optimizes each stage independently with the single-agent pipeline
// (under run_dir/stages/<name> when a run directory is given). Phase 2 runs
// repair-and-accept over the composed chain: mu scores only the final
// output, and each repair attempt asks the generator which stage is at fault
// and repairs that stage alone.
ChainResult optimize_chain(const ChainSpec& spec, const PipelineParams& params, const OptimizerContext& ctx,
                           const std::optional<std::filesystem::path>& run_dir = std::nullopt);

}  // namespace promptforge
