#include "promptforge/config.hpp"

#include <cstdlib>

#include "promptforge/storage.hpp"

namespace promptforge {

namespace {

// Reads `key` from `obj` when present; wraps type errors as ConfigError.
template <typename T>
void read(const Json& obj, const char* key, T& out, const std::string& section) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return;
    try {
        out = it->get<T>();
    } catch (const std::exception& e) {
        throw ConfigError("config key '" + section + "." + key + "': " + e.what());
    }
}

const Json& section(const Json& j, const char* name) {
    static const Json empty = Json::object();
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) return empty;
    if (!it->is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
    return *it;
}

BackendRole read_role(const Json& roles, Role role, const std::string& default_model) {
    BackendRole r = default_backend_role(role, default_model);
    auto name = std::string(to_string(role));
    const Json& obj = section(roles, name.c_str());
    read(obj, "model", r.model_id, "backends.roles." + name);
    read(obj, "temperature", r.temperature, "backends.roles." + name);
    read(obj, "max_output_chars", r.max_output_chars, "backends.roles." + name);
    return normalized(r);
}

}  // namespace

std::vector<ScriptRule> parse_script(const Json& rules) {
    if (!rules.is_array()) throw ConfigError("backends.script must be a list of rules");
    std::vector<ScriptRule> script;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const auto& r = rules[i];
        const std::string where = "backends.script[" + std::to_string(i) + "]";
        if (!r.is_object()) throw ConfigError(where + " must be an object");
        ScriptRule rule;
        if (r.contains("role")) {
            auto role = role_from_string(r["role"].get<std::string>());
            if (!role) throw ConfigError(where + ".role is not a known role");
            rule.role = role;
        }
        if (auto c = r.find("contains"); c != r.end()) {
            if (c->is_string())
                rule.contains.push_back(c->get<std::string>());
            else
                read(r, "contains", rule.contains, where);
        }
        if (r.contains("seed")) {
            std::int64_t seed = 0;
            read(r, "seed", seed, where);
            rule.seed = seed;
        }
        read(r, "response", rule.response, where);
        read(r, "responses", rule.responses, where);
        read(r, "fail_times", rule.fail_times, where);
        if (!r.contains("response") && rule.responses.empty())
            throw ConfigError(where + " needs 'response' or 'responses'");
        script.push_back(std::move(rule));
    }
    return script;
}

Config parse_config(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    Config c;

    const Json& b = section(j, "backends");
    std::string transport = "http";
    read(b, "transport", transport, "backends");
    if (transport == "http") {
        c.backends.transport = TransportKind::http;
    } else if (transport == "scripted") {
        c.backends.transport = TransportKind::scripted;
    } else {
        throw ConfigError("backends.transport must be 'http' or 'scripted'");
    }
    read(b, "url", c.backends.url, "backends");
    read(b, "timeout_s", c.backends.timeout_s, "backends");
    read(b, "parallelism", c.backends.parallelism, "backends");
    read(b, "cache", c.backends.cache, "backends");
    read(b, "max_request_chars", c.backends.max_request_chars, "backends");
    const Json& retry = section(b, "retry");
    read(retry, "max_attempts", c.backends.retry.max_attempts, "backends.retry");
    std::int64_t base_ms = c.backends.retry.base_delay.count();
    read(retry, "base_delay_ms", base_ms, "backends.retry");
    c.backends.retry.base_delay = std::chrono::milliseconds(base_ms);
    read(retry, "factor", c.backends.retry.factor, "backends.retry");
    if (b.contains("script")) {
        c.backends.script_json = b["script"];
        c.backends.script = parse_script(b["script"]);
    }
    std::string default_model = "default";
    read(b, "model", default_model, "backends");
    const Json& roles = section(b, "roles");
    c.backends.roles.extractor = read_role(roles, Role::extractor, default_model);
    c.backends.roles.generator = read_role(roles, Role::generator, default_model);
    c.backends.roles.agent = read_role(roles, Role::agent, default_model);
    c.backends.roles.judge = read_role(roles, Role::judge, default_model);

    if (j.contains("schema")) {
        try {
            c.pipeline.schema = schema_from_json(j["schema"]);
        } catch (const SchemaViolation& e) {
            throw ConfigError(std::string("schema: ") + e.what());
        }
    }

    read(section(j, "extraction"), "rounds", c.pipeline.extraction_rounds, "extraction");

    const Json& g = section(j, "generation");
    read(g, "batch_size", c.pipeline.generation.batch_size, "generation");
    read(g, "batches", c.pipeline.generation.batches, "generation");
    read(g, "improve_rounds", c.pipeline.generation.improve_rounds, "generation");
    read(g, "demo_cap", c.pipeline.generation.demo_cap, "generation");

    const Json& r = section(j, "refinement");
    read(r, "lambda", c.pipeline.refinement.lambda, "refinement");
    read(r, "iterations", c.pipeline.refinement.iterations, "refinement");
    read(r, "max_repairs", c.pipeline.refinement.max_repairs, "refinement");
    read(r, "improve_rounds", c.pipeline.refinement.improve_rounds, "refinement");

    std::string metric = "token_f1";
    read(section(j, "metric"), "type", metric, "metric");
    auto type = metric_from_string(metric);
    if (!type) throw ConfigError("metric.type must be exact_match, token_f1 or judge_relevancy");
    c.metric.type = *type;

    const Json& bl = section(j, "baselines");
    read(bl, "self_consistency_k", c.baselines.self_consistency_k, "baselines");
    read(bl, "sample_temperature", c.baselines.sample_temperature, "baselines");
    read(bl, "instruction_slot", c.baselines.instruction_slot, "baselines");

    if (j.contains("optimize_only_slot") && !j["optimize_only_slot"].is_null()) {
        std::string slot;
        read(j, "optimize_only_slot", slot, "");
        c.only_slot = slot;
    }
    read(j, "seed", c.seed, "");

    finalize(c);
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    Json j = Json::parse(text, nullptr, false, /*ignore_comments=*/true);
    if (j.is_discarded()) throw ConfigError("config '" + path.string() + "' is not valid JSON");
    return parse_config(j);
}

void finalize(Config& c) {
    c.pipeline.generation.seed = c.seed;
    c.pipeline.refinement.demo_cap = c.pipeline.generation.demo_cap;
    c.metric.judge.reset();
    if (c.metric.type == MetricType::judge_relevancy) c.metric.judge = c.backends.roles.judge;

    if (c.backends.parallelism < 1) throw ConfigError("backends.parallelism must be at least 1");
    if (c.backends.retry.max_attempts < 1 || c.backends.retry.max_attempts > 5)
        throw ConfigError("backends.retry.max_attempts must lie in [1, 5]");
    if (c.backends.retry.base_delay.count() < 0 || c.backends.retry.factor < 1.0)
        throw ConfigError("backends.retry needs base_delay_ms >= 0 and factor >= 1");
    if (c.backends.transport == TransportKind::http && c.backends.url.empty())
        throw ConfigError("backends.url is required for the http transport");
    if (c.backends.transport == TransportKind::scripted && c.backends.script.empty())
        throw ConfigError("backends.script is required for the scripted transport");
    if (c.pipeline.extraction_rounds < 1) throw ConfigError("extraction.rounds must be at least 1");
    if (c.pipeline.generation.batch_size < 1) throw ConfigError("generation.batch_size must be at least 1");
    if (c.pipeline.generation.batches < 1) throw ConfigError("generation.batches must be at least 1");
    if (c.pipeline.generation.improve_rounds < 1) throw ConfigError("generation.improve_rounds must be at least 1");
    try {
        c.pipeline.refinement.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("refinement: ") + e.what());
    }
    if (c.baselines.self_consistency_k < 1) throw ConfigError("baselines.self_consistency_k must be at least 1");
    auto has_slot = [&](const std::string& name) {
        for (const auto& d : c.pipeline.schema)
            if (d.name == name) return true;
        return false;
    };
    if (c.only_slot && !has_slot(*c.only_slot))
        throw ConfigError("optimize_only_slot '" + *c.only_slot + "' is not in the schema");
    if (!has_slot(c.baselines.instruction_slot))
        throw ConfigError("baselines.instruction_slot '" + c.baselines.instruction_slot + "' is not in the schema");
}

std::string config_hash(const Config& c) {
    Json j;
    j["transport"] = c.backends.transport == TransportKind::http ? "http" : "scripted";
    j["url"] = c.backends.url;
    j["max_request_chars"] = c.backends.max_request_chars;
    j["script"] = c.backends.script_json;
    j["roles"] = {to_json(c.backends.roles.extractor), to_json(c.backends.roles.generator),
                  to_json(c.backends.roles.agent), to_json(c.backends.roles.judge)};
    j["schema"] = to_json(c.pipeline.schema);
    j["extraction_rounds"] = c.pipeline.extraction_rounds;
    const auto& g = c.pipeline.generation;
    j["generation"] = {g.batch_size, g.batches, g.seed, g.improve_rounds, g.demo_cap};
    const auto& r = c.pipeline.refinement;
    j["refinement"] = {r.lambda, r.iterations, r.max_repairs, r.improve_rounds};
    j["metric"] = to_json(c.metric);
    j["only_slot"] = c.only_slot ? Json(*c.only_slot) : Json(nullptr);
    return sha256_hex(j.dump());
}

std::shared_ptr<Transport> make_transport(const Config& config) {
    if (config.backends.transport == TransportKind::scripted)
        return std::make_shared<ScriptedTransport>(config.backends.script);
    HttpTransport::Options opts;
    opts.url = config.backends.url;
    if (const char* key = std::getenv(kApiKeyEnv)) opts.api_key = key;
    opts.timeout = std::chrono::seconds(config.backends.timeout_s);
    return std::make_shared<HttpTransport>(std::move(opts));
}

std::unique_ptr<Gateway> make_gateway(const Config& config, std::shared_ptr<Transport> transport,
                                      const std::optional<std::filesystem::path>& cache_dir) {
    GatewayOptions opts;
    opts.parallelism = config.backends.parallelism;
    opts.retry = config.backends.retry;
    opts.max_request_chars = config.backends.max_request_chars;
    opts.cache_enabled = config.backends.cache;
    if (config.backends.cache) opts.cache_dir = cache_dir;
    return std::make_unique<Gateway>(std::move(transport), std::move(opts));
}

OptimizerContext make_context(const Config& config, Gateway& gateway) {
    OptimizerContext ctx;
    ctx.gateway = &gateway;
    ctx.roles = config.backends.roles;
    ctx.metric = config.metric;
    ctx.parallelism = config.backends.parallelism;
    ctx.only_slot = config.only_slot;
    return ctx;
}

BaselineOptions make_baseline_options(const Config& config, std::string instruction) {
    BaselineOptions o;
    o.agent = config.backends.roles.agent;
    o.selector = config.backends.roles.judge;
    o.k = config.baselines.self_consistency_k;
    o.sample_temperature = config.baselines.sample_temperature;
    o.seed = static_cast<std::int64_t>(config.seed);
    o.instruction = std::move(instruction);
    o.parallelism = config.backends.parallelism;
    return o;
}

}  // namespace promptforge
