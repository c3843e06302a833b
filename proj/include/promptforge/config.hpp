#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "promptforge/context.hpp"
#include "promptforge/optimizer.hpp"
#include "promptforge/pipelines.hpp"
#include "promptforge/serialize.hpp"

namespace promptforge {

inline constexpr const char* kApiKeyEnv = "PROMPTFORGE_API_KEY";

enum class TransportKind { http, scripted };

struct BackendConfig {
    TransportKind transport = TransportKind::http;
    std::string url;
    int timeout_s = 120;
    std::size_t parallelism = 8;
    bool cache = true;
    std::size_t max_request_chars = 100000;
    RetryPolicy retry;
    std::vector<ScriptRule> script;
    Json script_json = Json::array();  // as written, for hashing
    RoleSet roles;
};

struct BaselineConfig {
    int self_consistency_k = 5;
    double sample_temperature = 0.7;
    std::string instruction_slot = "task_intent";
};

// The whole run configuration. Every section is optional in the file;
// absent keys take the documented defaults.
struct Config {
    BackendConfig backends;
    PipelineParams pipeline;
    MetricKind metric;
    BaselineConfig baselines;
    std::optional<std::string> only_slot;
    std::uint64_t seed = 0;
};

// Throws ConfigError with the offending key on any invalid value.
Config parse_config(const Json& j);
Config load_config(const std::filesystem::path& path);

// Re-derives dependent fields after flag overrides (seed into generation,
// judge role into the metric) and validates cross-field constraints.
void finalize(Config& config);

// Hash of everything that influences optimization results. Parallelism,
// caching, retry and timeout settings are excluded.
std::string config_hash(const Config& config);

std::vector<ScriptRule> parse_script(const Json& rules);

std::shared_ptr<Transport> make_transport(const Config& config);
std::unique_ptr<Gateway> make_gateway(const Config& config, std::shared_ptr<Transport> transport,
                                      const std::optional<std::filesystem::path>& cache_dir);
OptimizerContext make_context(const Config& config, Gateway& gateway);
BaselineOptions make_baseline_options(const Config& config, std::string instruction);

}  // namespace promptforge
