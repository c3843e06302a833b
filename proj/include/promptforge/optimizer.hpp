#pragma once

#include <filesystem>
#include <optional>

#include "promptforge/context.hpp"
#include "promptforge/extraction.hpp"
#include "promptforge/generation.hpp"
#include "promptforge/refinement.hpp"
#include "promptforge/storage.hpp"

namespace promptforge {

struct PipelineParams {
    FeatureSchema schema = default_schema();
    int extraction_rounds = 1;
    GenerationParams generation;
    RefinementParams refinement;
};

struct PipelineOutcome {
    Phase completed = Phase::none;
    Phase resumed_from = Phase::none;
    std::optional<FeatureMatrix> features;
    std::optional<CandidatesArtifact> candidates;
    std::optional<RefinedArtifact> refined;
};

// Extract features, generate and score T candidates, refine the best one.
// With a run directory, completed phases are loaded instead of recomputed and
// every phase is checkpointed as it finishes; `stop_after` ends the run after
// the named phase.
PipelineOutcome run_pipeline(const Dataset& dataset, const PipelineParams& params, const OptimizerContext& ctx,
                             const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                             Phase stop_after = Phase::refined);

}  // namespace promptforge
