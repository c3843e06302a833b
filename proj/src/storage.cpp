#include "promptforge/storage.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace promptforge {

Dataset parse_dataset(std::string_view jsonl) {
    std::vector<Example> records;
    auto lines = split_lines(jsonl);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (trim(lines[i]).empty()) continue;
        Json j = Json::parse(lines[i], nullptr, false);
        if (j.is_discarded()) throw ParseError(line_no, "malformed JSON");
        if (!j.is_object()) throw ParseError(line_no, "record is not an object");
        Example ex;
        auto field = [&](const char* name, bool required) -> std::string {
            auto it = j.find(name);
            if (it == j.end() || it->is_null()) {
                if (required) throw ParseError(line_no, std::string("missing field '") + name + "'");
                return {};
            }
            if (!it->is_string()) throw ParseError(line_no, std::string("field '") + name + "' is not a string");
            return it->get<std::string>();
        };
        ex.input = field("input", true);
        ex.output = field("output", true);
        if (j.contains("id") && !j["id"].is_null()) {
            ex.id = field("id", true);
        } else {
            std::string n = std::to_string(line_no);
            ex.id = std::string(n.size() < 6 ? 6 - n.size() : 0, '0') + n;
        }
        records.push_back(std::move(ex));
    }
    return validate_dataset(std::move(records));
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Dataset load_dataset(const fs::path& path) { return parse_dataset(read_file(path)); }

std::string dataset_to_jsonl(const Dataset& dataset) {
    std::string out;
    for (const auto& ex : dataset) {
        Json j;
        j["id"] = ex.id;
        j["input"] = ex.input;
        j["output"] = ex.output;
        out += j.dump() + "\n";
    }
    return out;
}

void write_atomic(const fs::path& path, std::string_view content) {
    static std::atomic<unsigned> counter{0};
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message());
    }
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            fs::remove(tmp, ec);
            throw IoError("write failed for '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename onto '" + path.string() + "'");
    }
}

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::none: return "none";
        case Phase::features: return "features";
        case Phase::candidates: return "candidates";
        case Phase::refined: return "refined";
    }
    return "none";
}

std::optional<Phase> phase_from_string(std::string_view s) {
    if (s == "none") return Phase::none;
    if (s == "features") return Phase::features;
    if (s == "candidates") return Phase::candidates;
    if (s == "refined") return Phase::refined;
    return std::nullopt;
}

void save_checkpoint(const fs::path& run_dir, Phase phase, const Json& payload) {
    switch (phase) {
        case Phase::features:
            write_atomic(run_dir / "features.json", dump_artifact(payload));
            return;
        case Phase::candidates: {
            const auto& cands = payload.at("candidates");
            for (const auto& c : cands)
                write_atomic(run_dir / "candidates" / ("t" + std::to_string(c.at("batch_index").get<int>()) + ".json"),
                             dump_artifact(c));
            auto best_index = payload.at("best").get<std::size_t>();
            Json best;
            best["candidates"] = cands.size();
            best["best"] = cands.at(best_index);
            write_atomic(run_dir / "best.json", dump_artifact(best));
            return;
        }
        case Phase::refined:
            write_atomic(run_dir / "refinement_trace.json", dump_artifact(payload.at("trace")));
            write_atomic(run_dir / "optimized_prompt.json", dump_artifact(payload.at("optimized")));
            return;
        case Phase::none:
            return;
    }
}

void save_checkpoint(const fs::path& run_dir, const FeatureMatrix& features) {
    save_checkpoint(run_dir, Phase::features, to_json(features));
}

void save_checkpoint(const fs::path& run_dir, const CandidatesArtifact& candidates) {
    Json payload;
    payload["candidates"] = Json::array();
    for (const auto& c : candidates.candidates) payload["candidates"].push_back(to_json(c));
    payload["best"] = candidates.best;
    save_checkpoint(run_dir, Phase::candidates, payload);
}

void save_checkpoint(const fs::path& run_dir, const RefinedArtifact& refined) {
    Json payload;
    payload["optimized"] = to_json(refined.optimized);
    payload["trace"] = to_json(refined.trace);
    save_checkpoint(run_dir, Phase::refined, payload);
}

namespace {

Json read_json(const fs::path& path) {
    Json j = Json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw SchemaViolation("'" + path.filename().string() + "' is not valid JSON");
    return j;
}

template <typename F>
auto load_phase(Phase phase, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw CorruptCheckpoint(std::string(to_string(phase)), e.what());
    }
}

}  // namespace

ResumePoint resume(const fs::path& run_dir) {
    if (!fs::is_directory(run_dir)) throw IoError("run directory '" + run_dir.string() + "' does not exist");
    ResumePoint rp;

    if (fs::exists(run_dir / "features.json")) {
        rp.features = load_phase(Phase::features, [&] { return matrix_from_json(read_json(run_dir / "features.json")); });
        rp.phase = Phase::features;
    }

    if (fs::exists(run_dir / "best.json")) {
        rp.candidates = load_phase(Phase::candidates, [&] {
            Json best = read_json(run_dir / "best.json");
            auto count = best.at("candidates").get<std::size_t>();
            auto best_candidate = candidate_from_json(best.at("best"));
            CandidatesArtifact art;
            for (std::size_t t = 1; t <= count; ++t) {
                auto c = candidate_from_json(read_json(run_dir / "candidates" / ("t" + std::to_string(t) + ".json")));
                if (c.batch_index != static_cast<int>(t)) throw SchemaViolation("candidate file t" + std::to_string(t) + " has wrong batch index");
                art.candidates.push_back(std::move(c));
            }
            auto idx = static_cast<std::size_t>(best_candidate.batch_index - 1);
            if (idx >= art.candidates.size() || !(art.candidates[idx] == best_candidate))
                throw SchemaViolation("best.json disagrees with the candidate files");
            art.best = idx;
            return art;
        });
        rp.phase = Phase::candidates;
    }

    if (fs::exists(run_dir / "optimized_prompt.json")) {
        rp.refined = load_phase(Phase::refined, [&] {
            RefinedArtifact art;
            art.optimized = optimized_from_json(read_json(run_dir / "optimized_prompt.json"));
            art.trace = trace_from_json(read_json(run_dir / "refinement_trace.json"));
            return art;
        });
        rp.phase = Phase::refined;
    }
    return rp;
}

void ensure_config_hash(const fs::path& run_dir, const std::string& hash) {
    auto path = run_dir / "config.hash";
    if (fs::exists(path)) {
        auto stored = trim(read_file(path));
        if (stored != hash)
            throw ConfigMismatch("run directory was created with a different config (hash " + stored + ", now " +
                                 hash + ")");
        return;
    }
    write_atomic(path, hash + "\n");
}

void save_evaluation(const fs::path& run_dir, const std::string& label, const EvaluationReport& report) {
    write_atomic(run_dir / ("eval_" + label + ".json"), dump_artifact(to_json(report)));
}

}  // namespace promptforge
