#include "promptforge/serialize.hpp"

namespace promptforge {

namespace {

// Runs a decoder, turning library exceptions into SchemaViolation.
template <typename F>
auto decoding(const char* what, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const SchemaViolation&) {
        throw;
    } catch (const std::exception& e) {
        throw SchemaViolation(std::string("invalid ") + what + ": " + e.what());
    }
}

Score score_from(const Json& j) {
    if (!j.is_number()) throw SchemaViolation("score is not a number");
    return Score(j.get<double>());
}

}  // namespace

Json to_json(const FeatureSchema& schema) {
    Json arr = Json::array();
    for (const auto& d : schema) arr.push_back({{"name", d.name}, {"description", d.description}});
    return arr;
}

FeatureSchema schema_from_json(const Json& j) {
    return decoding("schema", [&] {
        FeatureSchema schema;
        if (!j.is_array()) throw SchemaViolation("schema must be a list of dimensions");
        for (const auto& d : j) {
            schema.push_back({d.at("name").get<std::string>(), d.value("description", std::string{})});
        }
        validate_schema(schema);
        return schema;
    });
}

Json to_json(const FeatureMatrix& matrix) {
    Json rows = Json::object();
    for (const auto& row : matrix.rows) {
        Json values = Json::object();
        for (std::size_t i = 0; i < matrix.dimensions.size(); ++i) values[matrix.dimensions[i].name] = row.values.at(i);
        rows[row.example_id] = {{"values", std::move(values)}, {"improvement_rounds", row.improvement_rounds}};
    }
    Json j;
    j["schema"] = to_json(matrix.dimensions);
    j["rows"] = std::move(rows);
    return j;
}

FeatureMatrix matrix_from_json(const Json& j) {
    return decoding("feature matrix", [&] {
        FeatureMatrix m;
        m.dimensions = schema_from_json(j.at("schema"));
        const auto& rows = j.at("rows");
        if (!rows.is_object()) throw SchemaViolation("rows must be an object keyed by example id");
        for (const auto& [id, row] : rows.items()) {
            FeatureVector v;
            v.example_id = id;
            const auto& values = row.at("values");
            if (values.size() != m.dimensions.size())
                throw ShapeMismatch(id, m.dimensions.size(), values.size());
            for (const auto& dim : m.dimensions) {
                auto text = values.at(dim.name).get<std::string>();
                if (text.empty()) throw SchemaViolation("empty feature '" + dim.name + "' in row '" + id + "'");
                v.values.push_back(std::move(text));
            }
            v.improvement_rounds = row.at("improvement_rounds").get<int>();
            m.rows.push_back(std::move(v));
        }
        return m;
    });
}

Json to_json(const PromptComponents& prompt) {
    Json comps = Json::object();
    for (const auto& c : prompt.components) comps[c.name] = c.text;
    Json demos = Json::array();
    for (const auto& d : prompt.demonstrations) demos.push_back({{"input", d.input}, {"output", d.output}});
    Json j;
    j["components"] = std::move(comps);
    j["demonstrations"] = std::move(demos);
    return j;
}

PromptComponents prompt_from_json(const Json& j) {
    return decoding("prompt", [&] {
        PromptComponents p;
        const auto& comps = j.at("components");
        if (!comps.is_object() || comps.empty()) throw SchemaViolation("components must be a nonempty object");
        for (const auto& [name, text] : comps.items()) p.components.push_back({name, text.get<std::string>()});
        for (const auto& d : j.at("demonstrations"))
            p.demonstrations.push_back({d.at("input").get<std::string>(), d.at("output").get<std::string>()});
        return p;
    });
}

Json to_json(const CandidatePrompt& candidate) {
    Json lineage = Json::array();
    for (const auto& e : candidate.lineage) {
        Json ev;
        ev["event"] = to_string(e.kind);
        if (!e.example_id.empty()) ev["example_id"] = e.example_id;
        lineage.push_back(std::move(ev));
    }
    Json j;
    j["batch_index"] = candidate.batch_index;
    j["score"] = candidate.score.value();
    j["prompt"] = to_json(candidate.prompt);
    j["lineage"] = std::move(lineage);
    return j;
}

CandidatePrompt candidate_from_json(const Json& j) {
    return decoding("candidate", [&] {
        CandidatePrompt c;
        c.batch_index = j.at("batch_index").get<int>();
        if (c.batch_index < 1) throw SchemaViolation("batch_index must be >= 1");
        c.score = score_from(j.at("score"));
        c.prompt = prompt_from_json(j.at("prompt"));
        for (const auto& ev : j.at("lineage")) {
            auto kind = lineage_kind_from_string(ev.at("event").get<std::string>());
            if (!kind) throw SchemaViolation("unknown lineage event");
            c.lineage.push_back({*kind, ev.value("example_id", std::string{})});
        }
        return c;
    });
}

Json to_json(const BackendRole& role) {
    Json j;
    j["model"] = role.model_id;
    j["temperature"] = role.temperature;
    j["max_output_chars"] = role.max_output_chars;
    return j;
}

BackendRole backend_role_from_json(const Json& j, Role role) {
    return decoding("backend role", [&] {
        BackendRole r = default_backend_role(role);
        r.model_id = j.value("model", r.model_id);
        r.temperature = j.value("temperature", r.temperature);
        r.max_output_chars = j.value("max_output_chars", r.max_output_chars);
        return r;
    });
}

Json to_json(const MetricKind& metric) {
    Json j;
    j["type"] = to_string(metric.type);
    if (metric.judge) j["judge"] = to_json(*metric.judge);
    return j;
}

MetricKind metric_from_json(const Json& j) {
    return decoding("metric", [&] {
        MetricKind m;
        auto type = metric_from_string(j.at("type").get<std::string>());
        if (!type) throw SchemaViolation("unknown metric type");
        m.type = *type;
        if (j.contains("judge")) m.judge = backend_role_from_json(j.at("judge"), Role::judge);
        return m;
    });
}

Json to_json(const EvaluationReport& report) {
    Json rows = Json::array();
    for (const auto& r : report.per_example) {
        Json row;
        row["id"] = r.example_id;
        row["answer"] = r.answer;
        row["score"] = r.score.value();
        row["flagged"] = r.flagged;
        if (!r.note.empty()) row["note"] = r.note;
        rows.push_back(std::move(row));
    }
    Json j;
    j["metric"] = to_json(report.metric);
    j["aggregate"] = report.aggregate.value();
    j["per_example"] = std::move(rows);
    return j;
}

EvaluationReport report_from_json(const Json& j) {
    return decoding("evaluation report", [&] {
        EvaluationReport r;
        r.metric = metric_from_json(j.at("metric"));
        r.aggregate = score_from(j.at("aggregate"));
        for (const auto& row : j.at("per_example")) {
            ExampleResult e;
            e.example_id = row.at("id").get<std::string>();
            e.answer = row.at("answer").get<std::string>();
            e.score = score_from(row.at("score"));
            e.flagged = row.at("flagged").get<bool>();
            e.note = row.value("note", std::string{});
            r.per_example.push_back(std::move(e));
        }
        return r;
    });
}

Json to_json(const RefinementTrace& trace) {
    Json accepted = Json::array();
    for (const auto& a : trace.accepted) {
        Json e;
        e["iteration"] = a.iteration;
        e["example_id"] = a.example_id;
        e["old_score"] = a.old_score.value();
        e["new_score"] = a.new_score.value();
        if (!a.stages.empty()) e["stages"] = a.stages;
        accepted.push_back(std::move(e));
    }
    Json attempts = Json::object();
    for (const auto& [id, n] : trace.repair_attempts) attempts[id] = n;
    Json j;
    j["initial_score"] = trace.initial_score.value();
    j["final_score"] = trace.final_score.value();
    j["accepted"] = std::move(accepted);
    j["repair_attempts"] = std::move(attempts);
    return j;
}

RefinementTrace trace_from_json(const Json& j) {
    return decoding("refinement trace", [&] {
        RefinementTrace t;
        t.initial_score = score_from(j.at("initial_score"));
        t.final_score = score_from(j.at("final_score"));
        for (const auto& e : j.at("accepted")) {
            AcceptedStep a;
            a.iteration = e.at("iteration").get<int>();
            a.example_id = e.at("example_id").get<std::string>();
            a.old_score = score_from(e.at("old_score"));
            a.new_score = score_from(e.at("new_score"));
            if (e.contains("stages")) a.stages = e.at("stages").get<std::vector<std::string>>();
            t.accepted.push_back(std::move(a));
        }
        for (const auto& [id, n] : j.at("repair_attempts").items()) t.repair_attempts.emplace_back(id, n.get<int>());
        return t;
    });
}

Json to_json(const OptimizedPrompt& optimized) {
    Json j;
    j["score"] = optimized.score.value();
    j["initial_score"] = optimized.initial_score.value();
    j["batch_index"] = optimized.batch_index;
    j["prompt"] = to_json(optimized.prompt);
    return j;
}

OptimizedPrompt optimized_from_json(const Json& j) {
    return decoding("optimized prompt", [&] {
        OptimizedPrompt o;
        o.score = score_from(j.at("score"));
        o.initial_score = score_from(j.at("initial_score"));
        o.batch_index = j.at("batch_index").get<int>();
        o.prompt = prompt_from_json(j.at("prompt"));
        return o;
    });
}

std::string dump_artifact(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace promptforge
