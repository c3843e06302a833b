#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptforge/core.hpp"
#include "promptforge/evaluation.hpp"
#include "promptforge/serialize.hpp"

namespace promptforge {

namespace fs = std::filesystem;

// JSON-lines, one {"id", "input", "output"} object per line. A missing id
// becomes the zero-padded line number ("000001"); blank lines are skipped.
// Throws ParseError(line) and the validate_dataset errors.
Dataset parse_dataset(std::string_view jsonl);
Dataset load_dataset(const fs::path& path);  // also IoError
std::string dataset_to_jsonl(const Dataset& dataset);

std::string read_file(const fs::path& path);  // throws IoError
// Writes `content` to a temporary sibling and renames it over `path`, so
// readers only ever see a complete file.
void write_atomic(const fs::path& path, std::string_view content);

enum class Phase { none, features, candidates, refined };

std::string_view to_string(Phase phase);
std::optional<Phase> phase_from_string(std::string_view s);

struct CandidatesArtifact {
    std::vector<CandidatePrompt> candidates;
    std::size_t best = 0;

    bool operator==(const CandidatesArtifact&) const = default;
};

struct RefinedArtifact {
    OptimizedPrompt optimized;
    RefinementTrace trace;

    bool operator==(const RefinedArtifact&) const = default;
};

// Canonical payloads per phase:
//   features   -> FeatureMatrix json                       (features.json)
//   candidates -> {"candidates": [...], "best": <index>}   (candidates/t<t>.json, best.json)
//   refined    -> {"optimized": ..., "trace": ...}          (optimized_prompt.json, refinement_trace.json)
// Each file is written atomically; the last file written for a phase
// (features.json, best.json, optimized_prompt.json) marks it complete.
void save_checkpoint(const fs::path& run_dir, Phase phase, const Json& payload);

void save_checkpoint(const fs::path& run_dir, const FeatureMatrix& features);
void save_checkpoint(const fs::path& run_dir, const CandidatesArtifact& candidates);
void save_checkpoint(const fs::path& run_dir, const RefinedArtifact& refined);

struct ResumePoint {
    Phase phase = Phase::none;  // furthest completed phase
    std::optional<FeatureMatrix> features;
    std::optional<CandidatesArtifact> candidates;
    std::optional<RefinedArtifact> refined;
};

// Loads every completed checkpoint. Throws CorruptCheckpoint(phase) when a
// marker file exists but the phase's artifacts fail to parse or validate.
ResumePoint resume(const fs::path& run_dir);

// Stores the hash on first use; throws ConfigMismatch when a different hash
// is already recorded.
void ensure_config_hash(const fs::path& run_dir, const std::string& hash);

void save_evaluation(const fs::path& run_dir, const std::string& label, const EvaluationReport& report);

}  // namespace promptforge
