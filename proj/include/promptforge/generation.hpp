#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "promptforge/context.hpp"
#include "promptforge/core.hpp"
#include "promptforge/evaluation.hpp"
#include "promptforge/self_improve.hpp"

namespace promptforge {

struct GenerationParams {
    std::size_t batch_size = 4;  // B
    int batches = 3;             // T
    std::uint64_t seed = 0;
    int improve_rounds = 1;
    std::size_t demo_cap = 4;
};

// B distinct rows drawn without replacement from a stream seeded by
// (seed, t). Row order is draw order. Throws BadBatchSize unless 1 <= B <= N.
FeatureMatrix sample_batch(const FeatureMatrix& matrix, std::size_t batch_size, std::uint64_t seed, int t);

// One generator call per column, synthesizing the B feature texts of that
// column into the aligned component slot. Demonstrations are the first
// `demo_cap` batch examples.
PromptComponents initialize_prompt(const FeatureMatrix& batch, const Dataset& dataset, Gateway& gateway,
                                   const BackendRole& generator, std::size_t demo_cap);

// Critique-then-revise over the components; demonstrations are untouched.
Improved<PromptComponents> self_improve_prompt(PromptComponents prompt, const FeatureSchema& schema,
                                               Gateway& gateway, const BackendRole& generator, int rounds,
                                               const std::string& tag = "generate");

struct GenerationResult {
    std::vector<CandidatePrompt> candidates;  // t = 1..T
    std::vector<EvaluationReport> reports;    // full-dataset evaluation per candidate
    std::size_t best = 0;                     // index into candidates

    const CandidatePrompt& best_candidate() const { return candidates.at(best); }
};

// Highest score wins; ties go to the smallest batch index.
std::size_t select_best(const std::vector<CandidatePrompt>& candidates);

// For t = 1..T: sample, initialize, self-improve, evaluate on the full
// dataset. Candidates are built concurrently; failures are rethrown as
// StageError("batch <t>").
GenerationResult generate_candidates(const FeatureMatrix& matrix, const GenerationParams& params,
                                     const Dataset& dataset, const OptimizerContext& ctx);

}  // namespace promptforge
