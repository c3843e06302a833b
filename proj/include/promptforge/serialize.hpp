#pragma once

#include <json.hpp>

#include "promptforge/core.hpp"
#include "promptforge/evaluation.hpp"
#include "promptforge/refinement.hpp"

// JSON encodings of the run artifacts. Object keys keep insertion order so
// artifacts are byte-stable and follow schema / dataset order. Decoders
// throw SchemaViolation on any structural problem.
namespace promptforge {

using Json = nlohmann::ordered_json;

struct OptimizedPrompt {
    PromptComponents prompt;
    Score score;
    Score initial_score;  // score of the best candidate before refinement
    int batch_index = 1;

    bool operator==(const OptimizedPrompt&) const = default;
};

Json to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const Json& j);

Json to_json(const FeatureMatrix& matrix);
FeatureMatrix matrix_from_json(const Json& j);

Json to_json(const PromptComponents& prompt);
PromptComponents prompt_from_json(const Json& j);

Json to_json(const CandidatePrompt& candidate);
CandidatePrompt candidate_from_json(const Json& j);

Json to_json(const MetricKind& metric);
MetricKind metric_from_json(const Json& j);

Json to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const Json& j);

Json to_json(const RefinementTrace& trace);
RefinementTrace trace_from_json(const Json& j);

Json to_json(const OptimizedPrompt& optimized);
OptimizedPrompt optimized_from_json(const Json& j);

Json to_json(const BackendRole& role);
BackendRole backend_role_from_json(const Json& j, Role role);

// Pretty form used for every artifact file (2-space indent, trailing newline).
std::string dump_artifact(const Json& j);

}  // namespace promptforge
