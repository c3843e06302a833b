#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptforge/error.hpp"

namespace promptforge {

// A gold input-output pair.
struct Example {
    std::string id;
    std::string input;
    std::string output;

    bool operator==(const Example&) const = default;
};

// Ordered, validated collection of gold examples. Only validate_dataset()
// constructs one, so every instance satisfies the id/field invariants.
class Dataset {
public:
    std::size_t size() const noexcept { return examples_.size(); }
    const Example& operator[](std::size_t i) const { return examples_[i]; }
    const std::vector<Example>& examples() const noexcept { return examples_; }
    auto begin() const noexcept { return examples_.begin(); }
    auto end() const noexcept { return examples_.end(); }

    // nullptr when absent.
    const Example* find(std::string_view id) const;

    bool operator==(const Dataset&) const = default;

private:
    friend Dataset validate_dataset(std::vector<Example> records);
    std::vector<Example> examples_;
};

// Validates raw records and returns them as a Dataset in the same order.
// Throws EmptyFieldError, DuplicateIdError, or DatasetError (no records).
Dataset validate_dataset(std::vector<Example> records);

struct FeatureDimension {
    std::string name;
    std::string description;

    bool operator==(const FeatureDimension&) const = default;
};

using FeatureSchema = std::vector<FeatureDimension>;

// task_intent, domain_terminology, reasoning_pattern, input_structure,
// output_format, constraints.
const FeatureSchema& default_schema();

// Throws SchemaViolation when the schema is empty or has duplicate or
// malformed names.
void validate_schema(const FeatureSchema& schema);

struct FeatureVector {
    std::string example_id;
    std::vector<std::string> values;  // one per schema dimension, in schema order
    int improvement_rounds = 0;

    bool operator==(const FeatureVector&) const = default;
};

struct FeatureMatrix {
    FeatureSchema dimensions;
    std::vector<FeatureVector> rows;

    std::size_t n() const noexcept { return rows.size(); }
    std::size_t l() const noexcept { return dimensions.size(); }

    bool operator==(const FeatureMatrix&) const = default;
};

struct Demonstration {
    std::string input;
    std::string output;

    bool operator==(const Demonstration&) const = default;
};

struct Component {
    std::string name;
    std::string text;

    bool operator==(const Component&) const = default;
};

// The agent prompt as L named slots (aligned with the feature schema) plus a
// list of demonstrations drawn from the gold data.
struct PromptComponents {
    std::vector<Component> components;
    std::vector<Demonstration> demonstrations;

    // All slots present with empty text.
    static PromptComponents empty(const FeatureSchema& schema);

    const std::string& text(std::string_view name) const;  // throws SchemaViolation
    void set(std::string_view name, std::string text);      // throws SchemaViolation
    bool has_schema(const FeatureSchema& schema) const;

    bool operator==(const PromptComponents&) const = default;
};

// A value in [0, 1]. Construction outside that range throws.
class Score {
public:
    constexpr Score() = default;
    explicit Score(double value);

    constexpr double value() const noexcept { return value_; }

    friend constexpr bool operator==(Score a, Score b) noexcept { return a.value_ == b.value_; }
    friend constexpr auto operator<=>(Score a, Score b) noexcept { return a.value_ <=> b.value_; }

private:
    double value_ = 0.0;
};

enum class LineageKind { initialized, self_improved, repaired };

struct LineageEvent {
    LineageKind kind = LineageKind::initialized;
    std::string example_id;  // set for repaired events

    bool operator==(const LineageEvent&) const = default;
};

std::string_view to_string(LineageKind kind);
std::optional<LineageKind> lineage_kind_from_string(std::string_view s);

struct CandidatePrompt {
    PromptComponents prompt;
    Score score;
    int batch_index = 1;
    std::vector<LineageEvent> lineage;

    bool operator==(const CandidatePrompt&) const = default;
};

// Section title used when rendering a slot: "task_intent" -> "Task Intent".
std::string section_title(std::string_view slot_name);

// Deterministic rendering of the agent prompt for one task input: nonempty
// slots as "## <Title>" sections in schema order, then demonstrations, then
// the task input under a final "Input:" header.
std::string render_prompt(const PromptComponents& prompt, std::string_view input);

// Text helpers shared by the metric and prompt parsers.
std::string trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);

}  // namespace promptforge
