#include "promptforge/extraction.hpp"

#include <unordered_map>

#include "promptforge/parallel.hpp"
#include "promptforge/prompts.hpp"
#include "promptforge/self_improve.hpp"

namespace promptforge {

FeatureVector extract_features(const Example& example, const FeatureSchema& schema, Gateway& gateway,
                               const BackendRole& extractor) {
    FeatureVector v;
    v.example_id = example.id;
    v.values.reserve(schema.size());
    const auto system = prompts::extractor_system();
    for (const auto& dim : schema) {
        std::string text;
        try {
            text = trim(gateway.ask(extractor, system, prompts::extract_dimension(dim, example), "extract"));
        } catch (const std::exception& e) {
            throw ExtractionFailed(dim.name, e.what());
        }
        if (text.empty()) throw ExtractionFailed(dim.name, "empty reply");
        v.values.push_back(std::move(text));
    }
    return v;
}

FeatureVector self_improve_features(FeatureVector vector, const Example& example, const FeatureSchema& schema,
                                    Gateway& gateway, const BackendRole& extractor, int rounds) {
    if (rounds < 1) throw ConfigError("feature self-improvement needs at least one round");
    if (vector.values.size() != schema.size())
        throw ShapeMismatch(vector.example_id, schema.size(), vector.values.size());

    CritiqueRevise spec{
        extractor,
        prompts::extractor_system(),
        "extract",
        [&](const std::string& current) { return prompts::critique_features(schema, example, current); },
        [&](const std::string& current, const std::string& critique) {
            return prompts::revise_features(schema, example, current, critique);
        },
    };
    auto improved = critique_and_revise(
        gateway, spec, std::move(vector.values), rounds,
        [&](const std::vector<std::string>& values) { return prompts::encode_values(schema, values); },
        [&](const std::string& reply, const std::vector<std::string>&) {
            return prompts::decode_values(reply, schema);
        });
    vector.values = std::move(improved.state);
    vector.improvement_rounds = improved.rounds;
    return vector;
}

FeatureMatrix build_matrix(std::vector<FeatureVector> vectors, const FeatureSchema& schema,
                           const Dataset& dataset) {
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (!dataset.find(vectors[i].example_id))
            throw MatrixError("feature vector for unknown example '" + vectors[i].example_id + "'");
        if (!by_id.emplace(vectors[i].example_id, i).second)
            throw MatrixError("duplicate feature vector for '" + vectors[i].example_id + "'");
    }
    FeatureMatrix m;
    m.dimensions = schema;
    m.rows.reserve(dataset.size());
    for (const auto& ex : dataset) {
        auto it = by_id.find(ex.id);
        if (it == by_id.end()) throw MissingRow(ex.id);
        auto& row = vectors[it->second];
        if (row.values.size() != schema.size())
            throw ShapeMismatch(ex.id, schema.size(), row.values.size());
        m.rows.push_back(std::move(row));
    }
    return m;
}

FeatureMatrix extract_all(const Dataset& dataset, const FeatureSchema& schema, Gateway& gateway,
                          const ExtractionOptions& options) {
    validate_schema(schema);
    auto vectors = parallel_map(dataset.size(), options.parallelism, [&](std::size_t i) {
        const auto& ex = dataset[i];
        return with_context("example " + ex.id, [&] {
            auto v = extract_features(ex, schema, gateway, options.extractor);
            return self_improve_features(std::move(v), ex, schema, gateway, options.extractor, options.rounds);
        });
    });
    return build_matrix(std::move(vectors), schema, dataset);
}

}  // namespace promptforge
