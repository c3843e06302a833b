#pragma once

#include <cstddef>
#include <vector>

#include "promptforge/core.hpp"
#include "promptforge/gateway.hpp"

namespace promptforge {

struct ExtractionOptions {
    BackendRole extractor = default_backend_role(Role::extractor);
    int rounds = 1;  // self-improvement rounds per example
    std::size_t parallelism = 8;
};

// One extractor call per schema dimension. Throws ExtractionFailed naming the
// first dimension whose call fails or returns blank text.
FeatureVector extract_features(const Example& example, const FeatureSchema& schema, Gateway& gateway,
                               const BackendRole& extractor);

// Critique-then-revise over the whole vector, restricted to the one example.
// `improvement_rounds` records the rounds that actually revised.
FeatureVector self_improve_features(FeatureVector vector, const Example& example, const FeatureSchema& schema,
                                    Gateway& gateway, const BackendRole& extractor, int rounds);

// Stacks vectors into M in dataset order.
FeatureMatrix build_matrix(std::vector<FeatureVector> vectors, const FeatureSchema& schema,
                           const Dataset& dataset);

// extract + self-improve every example concurrently, then build_matrix.
// Failures are rethrown as StageError("example <id>").
FeatureMatrix extract_all(const Dataset& dataset, const FeatureSchema& schema, Gateway& gateway,
                          const ExtractionOptions& options);

}  // namespace promptforge
