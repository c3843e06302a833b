#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "promptforge/error.hpp"

namespace promptforge {

enum class Role { extractor, generator, agent, judge };

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view s);

struct BackendRole {
    Role role = Role::agent;
    std::string model_id;
    double temperature = 0.0;
    int max_output_chars = 4000;

    bool operator==(const BackendRole&) const = default;
};

// Defaults: extractor 0.0, generator 0.7, agent 0.0, judge 0.0.
BackendRole default_backend_role(Role role, std::string model_id = "default");

// Throws ConfigError if temperature is outside [0, 2] or max_output_chars is
// not positive. The judge role always runs at temperature 0.
BackendRole normalized(BackendRole role);

enum class Speaker { system, user, assistant };

std::string_view to_string(Speaker speaker);

struct Message {
    Speaker speaker = Speaker::user;
    std::string text;

    bool operator==(const Message&) const = default;
};

struct ChatRequest {
    BackendRole role;
    std::vector<Message> messages;
    std::optional<std::int64_t> seed;
    // Accounting label ("extract", "generate.critique", ...). Not part of the
    // cache key and never sent over the wire.
    std::string tag;

    std::size_t total_chars() const;
    const std::string& last_user() const;  // empty string when there is none
};

struct Usage {
    std::int64_t input_units = 0;
    std::int64_t output_units = 0;

    bool operator==(const Usage&) const = default;
};

struct ChatResponse {
    std::string text;
    Usage usage;
    bool cached = false;
};

struct CacheKey {
    std::array<std::uint8_t, 32> digest{};

    std::string hex() const;
    bool operator==(const CacheKey&) const = default;
};

// SHA-256 over a canonical encoding of (model_id, temperature, seed, messages).
CacheKey cache_key(const ChatRequest& request);

// Lowercase hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);

// Performs one attempt against a model server. Implementations throw
// TransportError (retryable or not) or ProtocolError.
class Transport {
public:
    virtual ~Transport() = default;
    virtual ChatResponse send(const ChatRequest& request) = 0;
};

// ---- scripted backend ----------------------------------------------------

// One rule of a scripted backend. A rule matches when every set matcher
// agrees. The reply is the first available of: `responder`, `responses`
// (consumed in order, the last one repeating), `response`. Templates accept
// the placeholders {last_user}, {system}, {current}, {seed}, {line:P} and
// {after:M}; see fill_template().
struct ScriptRule {
    std::optional<Role> role;
    std::vector<std::string> contains;  // all must occur in some message
    std::optional<std::int64_t> seed;
    std::string response;
    std::vector<std::string> responses;
    std::function<std::string(const ChatRequest&)> responder;
    int fail_times = 0;  // first N matches raise a retryable TransportError
};

std::string fill_template(std::string_view tmpl, const ChatRequest& request);

// Returns the reply of the first matching rule. Throws NoRuleMatchedError.
// Stateful rules (`responses`, `fail_times`) advance the per-rule counter
// passed in `hits`.
std::string scripted_lookup(const std::vector<ScriptRule>& script, const ChatRequest& request,
                            std::vector<int>* hits = nullptr);

// Deterministic test double. Thread-safe.
class ScriptedTransport : public Transport {
public:
    explicit ScriptedTransport(std::vector<ScriptRule> script);
    ChatResponse send(const ChatRequest& request) override;

private:
    std::vector<ScriptRule> script_;
    std::vector<int> hits_;
    std::mutex mutex_;
};

// Chat-completions over HTTP(S): POST {model, messages, temperature, ...}
// with a bearer token.
class HttpTransport : public Transport {
public:
    struct Options {
        std::string url;  // full endpoint, e.g. http://localhost:8000/v1/chat/completions
        std::string api_key;
        std::chrono::seconds timeout{120};
    };

    explicit HttpTransport(Options options);
    ChatResponse send(const ChatRequest& request) override;

    // Body that send() posts. Exposed for tests.
    static std::string request_body(const ChatRequest& request);
    // Throws ProtocolError on anything but a well-formed completion.
    static ChatResponse parse_response(std::string_view body);

private:
    Options options_;
    std::string scheme_host_port_;
    std::string path_;
};

// ---- gateway -------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;

    // Delay before attempt `attempt + 1` (attempt is 1-based).
    std::chrono::milliseconds delay_after(int attempt) const;
};

struct GatewayOptions {
    std::size_t parallelism = 8;
    RetryPolicy retry;
    std::size_t max_request_chars = 100000;
    bool cache_enabled = true;
    std::optional<std::filesystem::path> cache_dir;  // in-memory only when unset
    std::function<void(std::chrono::milliseconds)> sleeper;  // default: this_thread::sleep_for
};

struct CallStats {
    std::int64_t calls = 0;            // complete() invocations
    std::int64_t transport_calls = 0;  // attempts that reached the transport
    std::int64_t cache_hits = 0;
    std::map<std::string, std::int64_t> by_tag;
    std::map<std::string, std::int64_t> by_role;
    std::vector<std::chrono::milliseconds> backoff_delays;
};

// Uniform entry point for every model call: validates the request, serves
// from cache, bounds in-flight transport calls and retries transient
// failures with exponential backoff. Safe to call concurrently.
class Gateway {
public:
    Gateway(std::shared_ptr<Transport> transport, GatewayOptions options = {});

    ChatResponse complete(const ChatRequest& request);

    CallStats stats() const;
    void reset_stats();
    std::size_t parallelism() const noexcept { return options_.parallelism; }

    // Simple single-turn helper.
    std::string ask(const BackendRole& role, std::string_view system, std::string_view user,
                    std::string_view tag, std::optional<std::int64_t> seed = std::nullopt);

private:
    std::optional<ChatResponse> cache_get(const CacheKey& key);
    void cache_put(const CacheKey& key, const ChatResponse& response);
    ChatResponse send_with_retry(const ChatRequest& request);

    std::shared_ptr<Transport> transport_;
    GatewayOptions options_;
    std::counting_semaphore<> in_flight_;

    mutable std::mutex mutex_;
    CallStats stats_;
    std::unordered_map<std::string, ChatResponse> memory_cache_;
};

}  // namespace promptforge
