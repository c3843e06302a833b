#include "promptforge/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace promptforge {

const Example* Dataset::find(std::string_view id) const {
    auto it = std::find_if(examples_.begin(), examples_.end(),
                           [&](const Example& e) { return e.id == id; });
    return it == examples_.end() ? nullptr : &*it;
}

Dataset validate_dataset(std::vector<Example> records) {
    if (records.empty()) throw DatasetError("dataset has no records");
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.id.empty()) throw EmptyFieldError(i, "id");
        if (r.input.empty()) throw EmptyFieldError(i, "input");
        if (r.output.empty()) throw EmptyFieldError(i, "output");
        if (!seen.insert(r.id).second) throw DuplicateIdError(r.id);
    }
    Dataset d;
    d.examples_ = std::move(records);
    return d;
}

const FeatureSchema& default_schema() {
    static const FeatureSchema schema{
        {"task_intent", "What the user is trying to accomplish and what a good response must achieve."},
        {"domain_terminology", "Domain-specific vocabulary, entities and concepts the response relies on."},
        {"reasoning_pattern", "The reasoning steps needed to get from the input to the gold output."},
        {"input_structure", "How the input is phrased and organized, and which parts carry the signal."},
        {"output_format", "Shape, length, tone and structure of the gold output."},
        {"constraints", "Rules, caveats and boundaries the gold output respects."},
    };
    return schema;
}

void validate_schema(const FeatureSchema& schema) {
    if (schema.empty()) throw SchemaViolation("feature schema is empty");
    std::unordered_set<std::string> names;
    for (const auto& dim : schema) {
        if (dim.name.empty()) throw SchemaViolation("feature dimension with empty name");
        bool ok = std::all_of(dim.name.begin(), dim.name.end(), [](unsigned char c) {
            return std::isalnum(c) || c == '_';
        });
        if (!ok) throw SchemaViolation("feature dimension name '" + dim.name + "' must match [A-Za-z0-9_]+");
        if (!names.insert(dim.name).second)
            throw SchemaViolation("duplicate feature dimension '" + dim.name + "'");
    }
}

PromptComponents PromptComponents::empty(const FeatureSchema& schema) {
    PromptComponents p;
    p.components.reserve(schema.size());
    for (const auto& dim : schema) p.components.push_back({dim.name, {}});
    return p;
}

const std::string& PromptComponents::text(std::string_view name) const {
    for (const auto& c : components)
        if (c.name == name) return c.text;
    throw SchemaViolation("prompt has no component '" + std::string(name) + "'");
}

void PromptComponents::set(std::string_view name, std::string text) {
    for (auto& c : components) {
        if (c.name == name) {
            c.text = std::move(text);
            return;
        }
    }
    throw SchemaViolation("prompt has no component '" + std::string(name) + "'");
}

bool PromptComponents::has_schema(const FeatureSchema& schema) const {
    if (components.size() != schema.size()) return false;
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (components[i].name != schema[i].name) return false;
    return true;
}

Score::Score(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0))
        throw std::out_of_range("score " + std::to_string(value) + " outside [0, 1]");
}

std::string_view to_string(LineageKind kind) {
    switch (kind) {
        case LineageKind::initialized: return "initialized";
        case LineageKind::self_improved: return "self_improved";
        case LineageKind::repaired: return "repaired";
    }
    return "unknown";
}

std::optional<LineageKind> lineage_kind_from_string(std::string_view s) {
    if (s == "initialized") return LineageKind::initialized;
    if (s == "self_improved") return LineageKind::self_improved;
    if (s == "repaired") return LineageKind::repaired;
    return std::nullopt;
}

std::string section_title(std::string_view slot_name) {
    std::string out;
    out.reserve(slot_name.size());
    bool word_start = true;
    for (char c : slot_name) {
        if (c == '_') {
            out.push_back(' ');
            word_start = true;
        } else {
            out.push_back(word_start ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
            word_start = false;
        }
    }
    return out;
}

std::string render_prompt(const PromptComponents& prompt, std::string_view input) {
    std::ostringstream ss;
    for (const auto& c : prompt.components) {
        if (c.text.empty()) continue;
        ss << "## " << section_title(c.name) << "\n" << c.text << "\n\n";
    }
    if (!prompt.demonstrations.empty()) {
        ss << "## Examples\n";
        for (const auto& d : prompt.demonstrations)
            ss << "Input: " << d.input << "\nOutput: " << d.output << "\n\n";
    }
    ss << "Input:\n" << input << "\n";
    return ss.str();
}

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(s.substr(start));
            break;
        }
        auto line = s.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = nl + 1;
    }
    return lines;
}

}  // namespace promptforge
