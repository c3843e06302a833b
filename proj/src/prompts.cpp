#include "promptforge/prompts.hpp"

#include <cctype>
#include <sstream>

#include <json.hpp>

namespace promptforge::prompts {

using Json = nlohmann::ordered_json;

namespace {

void example_block(std::ostringstream& ss, const Example& ex) {
    ss << "Gold example\nInput:\n" << ex.input << "\nOutput:\n" << ex.output << "\n\n";
}

void current_block(std::ostringstream& ss, const std::string& current) {
    ss << kBeginCurrent << "\n" << current << "\n" << kEndCurrent << "\n";
}

std::string key_list(const FeatureSchema& schema) {
    std::string out;
    for (const auto& d : schema) {
        if (!out.empty()) out += ", ";
        out += d.name;
    }
    return out;
}

Json extract_object(std::string_view reply) {
    auto b = reply.find('{');
    auto e = reply.rfind('}');
    if (b == std::string_view::npos || e == std::string_view::npos || e < b)
        throw SchemaViolation("reply contains no JSON object");
    Json j = Json::parse(reply.substr(b, e - b + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw SchemaViolation("reply JSON is malformed");
    return j;
}

std::vector<std::string> read_map(const Json& obj, const FeatureSchema& schema, bool allow_empty) {
    if (!obj.is_object()) throw SchemaViolation("component map is not an object");
    if (obj.size() != schema.size())
        throw SchemaViolation("expected " + std::to_string(schema.size()) + " slots, got " +
                              std::to_string(obj.size()));
    std::vector<std::string> values;
    values.reserve(schema.size());
    for (const auto& dim : schema) {
        auto it = obj.find(dim.name);
        if (it == obj.end()) throw SchemaViolation("missing slot '" + dim.name + "'");
        if (!it->is_string()) throw SchemaViolation("slot '" + dim.name + "' is not text");
        auto text = trim(it->get<std::string>());
        if (text.empty() && !allow_empty) throw SchemaViolation("slot '" + dim.name + "' is empty");
        values.push_back(std::move(text));
    }
    return values;
}

}  // namespace

std::string extractor_system() {
    return "You are a feature extraction agent. You study one gold input-output example of a "
           "task and describe a single named dimension of its context precisely and concisely.";
}

std::string extract_dimension(const FeatureDimension& dim, const Example& example) {
    std::ostringstream ss;
    ss << "Dimension: " << dim.name << "\n"
       << "Description: " << dim.description << "\n\n";
    example_block(ss, example);
    ss << "Describe this dimension of the example in a few sentences that would help someone "
          "write instructions for producing such outputs. Reply with the description only.";
    return ss.str();
}

std::string critique_features(const FeatureSchema& schema, const Example& example, const std::string& current) {
    std::ostringstream ss;
    ss << "Task: critique extracted features\n\n";
    example_block(ss, example);
    ss << "The features below were extracted from this example, one per dimension ("
       << key_list(schema) << "). List concrete inaccuracies, omissions or vague statements. "
       << "If the features are accurate and complete, reply with exactly OK.\n\n";
    current_block(ss, current);
    return ss.str();
}

std::string revise_features(const FeatureSchema& schema, const Example& example, const std::string& current,
                            const std::string& critique) {
    std::ostringstream ss;
    ss << "Task: revise extracted features\n\n";
    example_block(ss, example);
    ss << "Critique:\n" << critique << "\n\n"
       << "Rewrite the features to address the critique. Reply with a JSON object whose keys are "
       << "exactly: " << key_list(schema) << ". Every value must be nonempty text.\n\n";
    current_block(ss, current);
    return ss.str();
}

std::string generator_system() {
    return "You are a prompt engineer. You write and improve the components of a prompt that "
           "an LLM agent follows to solve a context-specific task.";
}

std::string initialize_component(const FeatureDimension& dim, const std::vector<std::string>& example_ids,
                                 const std::vector<std::string>& column) {
    std::ostringstream ss;
    ss << "Component: " << dim.name << "\n"
       << "Description: " << dim.description << "\n\n"
       << "Below are notes on this aspect, each extracted from one gold example of the task. "
       << "Synthesize them into one general, self-contained instruction for the '" << dim.name
       << "' component of the agent's prompt. Keep what generalizes and drop example-specific "
          "details.\n\nFeature notes:\n";
    for (std::size_t i = 0; i < column.size(); ++i)
        ss << "- [" << example_ids[i] << "] " << column[i] << "\n";
    ss << "\nReply with the component text only.";
    return ss.str();
}

std::string critique_prompt(const FeatureSchema& schema, const std::string& current) {
    std::ostringstream ss;
    ss << "Task: critique prompt components\n\n"
       << "Review the agent prompt components below (" << key_list(schema) << "). Point out "
       << "contradictions, gaps, ambiguity and redundancy. If nothing needs to change, reply "
          "with exactly OK.\n\n";
    current_block(ss, current);
    return ss.str();
}

std::string revise_prompt(const FeatureSchema& schema, const std::string& current, const std::string& critique) {
    std::ostringstream ss;
    ss << "Task: revise prompt components\n\n"
       << "Critique:\n" << critique << "\n\n"
       << "Rewrite the components to address the critique. Reply with a JSON object "
          "{\"components\": {...}} whose component keys are exactly: "
       << key_list(schema) << ". Every value must be nonempty text.\n\n";
    current_block(ss, current);
    return ss.str();
}

std::string repair_prompt(const FeatureSchema& schema, const Example& example, std::string_view agent_answer,
                          std::size_t demo_cap, const std::string& current) {
    std::ostringstream ss;
    ss << "Task: repair prompt for a failing example\n\n"
       << "Example id: " << example.id << "\n";
    example_block(ss, example);
    ss << "Agent answer:\n" << agent_answer << "\n\n"
       << "The agent answered this example poorly under the prompt below. Minimally edit the "
          "components so the prompt also covers this example, without breaking what already "
          "works. You may append this example to the demonstrations (at most "
       << demo_cap << " in total). Reply with a JSON object {\"components\": {...}, "
          "\"demonstrations\": [{\"input\": ..., \"output\": ...}]} whose component keys are "
          "exactly: "
       << key_list(schema) << ".\n\n";
    current_block(ss, current);
    return ss.str();
}

std::string judge_system() {
    return "You are an impartial judge of answer relevancy for question answering.";
}

std::string judge_relevancy(std::string_view question, std::string_view answer, std::string_view gold) {
    std::ostringstream ss;
    ss << "Rate how relevant the candidate answer is to the question, using the reference answer "
          "as ground truth. Consider correctness, coherence and informativeness.\n\n"
       << "Question:\n" << question << "\n\n"
       << "Reference answer:\n" << gold << "\n\n"
       << "Candidate answer:\n" << answer << "\n\n"
       << "Give a short justification, then end your reply with a final line of the form\n"
       << kScoreMarker << " <v>\nwhere <v> is a number between 0 and 1 with at most 3 decimals.";
    return ss.str();
}

namespace {
void instruction_block(std::ostringstream& ss, std::string_view instruction) {
    if (!instruction.empty()) ss << "Instructions:\n" << instruction << "\n\n";
}
}  // namespace

std::string cot(std::string_view instruction, std::string_view input) {
    std::ostringstream ss;
    instruction_block(ss, instruction);
    ss << "Question:\n" << input << "\n\n"
       << "Think step by step, then give the final answer on the last line, prefixed with "
          "\"Answer:\".";
    return ss.str();
}

std::string sequential_draft(std::string_view instruction, std::string_view input) {
    std::ostringstream ss;
    instruction_block(ss, instruction);
    ss << "Question:\n" << input << "\n\n"
       << "Reason step by step about how to answer this question. Do not give the final answer "
          "yet.";
    return ss.str();
}

std::string sequential_answer(std::string_view instruction, std::string_view input, std::string_view draft) {
    std::ostringstream ss;
    instruction_block(ss, instruction);
    ss << "Question:\n" << input << "\n\n"
       << "Reasoning draft:\n" << draft << "\n\n"
       << "Using the reasoning above, give the final answer on the last line, prefixed with "
          "\"Answer:\".";
    return ss.str();
}

std::string select_consistent(std::string_view input, const std::vector<std::string>& answers) {
    std::ostringstream ss;
    ss << "Several independently sampled answers to the same question follow. Pick the answer "
          "that agrees with the majority of the others in substance.\n\n"
       << "Question:\n" << input << "\n\n";
    for (std::size_t i = 0; i < answers.size(); ++i)
        ss << "Candidate " << (i + 1) << ":\n" << answers[i] << "\n\n";
    ss << "End your reply with a final line of the form\n" << kSelectedMarker << " <n>\nwhere <n> is the "
       << "candidate number.";
    return ss.str();
}

std::string attribute_fault(std::string_view chain_input, std::string_view gold,
                            const std::vector<std::string>& stage_names,
                            const std::vector<std::string>& stage_outputs) {
    std::ostringstream ss;
    ss << "Task: attribute a multi-stage failure\n\n"
       << "A chain of agents processed the input below; each stage consumes the previous "
          "stage's output. The final output does not match the gold output. Identify the single "
          "stage most responsible.\n\n"
       << "Chain input:\n" << chain_input << "\n\n"
       << "Gold final output:\n" << gold << "\n\n";
    for (std::size_t i = 0; i < stage_names.size(); ++i)
        ss << "Stage: " << stage_names[i] << "\nOutput:\n" << stage_outputs[i] << "\n\n";
    ss << "End your reply with a final line of the form\n" << kStageMarker << " <name>";
    return ss.str();
}

bool critique_accepts(std::string_view critique) {
    auto t = trim(critique);
    if (t.rfind("OK", 0) != 0) return false;
    return t.size() == 2 || !std::isalnum(static_cast<unsigned char>(t[2]));
}

std::string encode_values(const FeatureSchema& schema, const std::vector<std::string>& values) {
    Json j = Json::object();
    for (std::size_t i = 0; i < schema.size(); ++i) j[schema[i].name] = values.at(i);
    return j.dump(2);
}

std::string encode_prompt(const PromptComponents& prompt) {
    Json comps = Json::object();
    for (const auto& c : prompt.components) comps[c.name] = c.text;
    Json demos = Json::array();
    for (const auto& d : prompt.demonstrations) demos.push_back({{"input", d.input}, {"output", d.output}});
    Json j;
    j["components"] = std::move(comps);
    j["demonstrations"] = std::move(demos);
    return j.dump(2);
}

std::vector<std::string> decode_values(std::string_view reply, const FeatureSchema& schema) {
    Json j = extract_object(reply);
    if (j.contains("components") && j["components"].is_object()) return read_map(j["components"], schema, false);
    if (j.contains("values") && j["values"].is_object()) return read_map(j["values"], schema, false);
    return read_map(j, schema, false);
}

DecodedPrompt decode_prompt(std::string_view reply, const FeatureSchema& schema) {
    Json j = extract_object(reply);
    DecodedPrompt out;
    if (j.contains("components")) {
        out.components = read_map(j["components"], schema, true);
    } else {
        out.components = read_map(j, schema, true);
        return out;
    }
    if (auto it = j.find("demonstrations"); it != j.end()) {
        if (!it->is_array()) throw SchemaViolation("demonstrations is not a list");
        out.has_demonstrations = true;
        for (const auto& d : *it) {
            if (!d.is_object() || !d.contains("input") || !d.contains("output") || !d["input"].is_string() ||
                !d["output"].is_string())
                throw SchemaViolation("malformed demonstration");
            out.demonstrations.push_back({d["input"].get<std::string>(), d["output"].get<std::string>()});
        }
    }
    return out;
}

std::string final_answer(std::string_view reply) {
    static constexpr std::string_view marker = "Answer:";
    auto p = reply.rfind(marker);
    if (p == std::string_view::npos) return trim(reply);
    return trim(reply.substr(p + marker.size()));
}

}  // namespace promptforge::prompts
