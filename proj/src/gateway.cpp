#include "promptforge/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <openssl/evp.h>

#include <httplib.h>
#include <json.hpp>

#include "promptforge/core.hpp"

namespace promptforge {

using nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::extractor: return "extractor";
        case Role::generator: return "generator";
        case Role::agent: return "agent";
        case Role::judge: return "judge";
    }
    return "unknown";
}

std::optional<Role> role_from_string(std::string_view s) {
    if (s == "extractor") return Role::extractor;
    if (s == "generator") return Role::generator;
    if (s == "agent") return Role::agent;
    if (s == "judge") return Role::judge;
    return std::nullopt;
}

std::string_view to_string(Speaker speaker) {
    switch (speaker) {
        case Speaker::system: return "system";
        case Speaker::user: return "user";
        case Speaker::assistant: return "assistant";
    }
    return "user";
}

BackendRole default_backend_role(Role role, std::string model_id) {
    BackendRole r;
    r.role = role;
    r.model_id = std::move(model_id);
    r.temperature = role == Role::generator ? 0.7 : 0.0;
    return r;
}

BackendRole normalized(BackendRole role) {
    if (!(role.temperature >= 0.0 && role.temperature <= 2.0))
        throw ConfigError("temperature for role '" + std::string(to_string(role.role)) +
                          "' must lie in [0, 2]");
    if (role.max_output_chars <= 0)
        throw ConfigError("max_output_chars for role '" + std::string(to_string(role.role)) +
                          "' must be positive");
    if (role.role == Role::judge) role.temperature = 0.0;
    return role;
}

std::size_t ChatRequest::total_chars() const {
    std::size_t n = 0;
    for (const auto& m : messages) n += m.text.size();
    return n;
}

const std::string& ChatRequest::last_user() const {
    static const std::string none;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it)
        if (it->speaker == Speaker::user) return it->text;
    return none;
}

std::string CacheKey::hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : digest) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

namespace {

CacheKey sha256(std::string_view bytes) {
    CacheKey key;
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), key.digest.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != key.digest.size())
        throw Error("SHA-256 digest failed");
    return key;
}

}  // namespace

CacheKey cache_key(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({to_string(m.speaker), m.text});
    json canonical = {"pf-cache-v1", request.role.model_id, request.role.temperature,
                      request.seed ? json(*request.seed) : json(nullptr), messages};
    return sha256(canonical.dump());
}

std::string sha256_hex(std::string_view bytes) { return sha256(bytes).hex(); }

// ---- scripted --------------------------------------------------------------

namespace {

std::string system_text(const ChatRequest& r) {
    for (const auto& m : r.messages)
        if (m.speaker == Speaker::system) return m.text;
    return {};
}

std::string between_markers(const std::string& text, std::string_view begin, std::string_view end) {
    auto b = text.find(begin);
    if (b == std::string::npos) return {};
    b = text.find('\n', b);
    if (b == std::string::npos) return {};
    auto e = text.find(end, b);
    if (e == std::string::npos) e = text.size();
    return trim(std::string_view(text).substr(b + 1, e - b - 1));
}

std::string line_value(const std::string& text, std::string_view prefix) {
    std::string key = std::string(prefix) + ": ";
    for (const auto& line : split_lines(text))
        if (line.rfind(key, 0) == 0) return line.substr(key.size());
    return {};
}

std::string after_marker(const std::string& text, std::string_view marker) {
    auto p = text.rfind(marker);
    if (p == std::string::npos) return {};
    return trim(std::string_view(text).substr(p + marker.size()));
}

std::optional<std::string> placeholder(std::string_view name, const ChatRequest& r) {
    if (name == "last_user") return r.last_user();
    if (name == "system") return system_text(r);
    if (name == "current") return between_markers(r.last_user(), "BEGIN CURRENT", "END CURRENT");
    if (name == "seed") return r.seed ? std::to_string(*r.seed) : std::string{};
    if (name.rfind("line:", 0) == 0) return line_value(r.last_user(), name.substr(5));
    if (name.rfind("after:", 0) == 0) return after_marker(r.last_user(), name.substr(6));
    return std::nullopt;
}

bool rule_matches(const ScriptRule& rule, const ChatRequest& r) {
    if (rule.role && *rule.role != r.role.role) return false;
    if (rule.seed && rule.seed != r.seed) return false;
    for (const auto& needle : rule.contains) {
        bool found = std::any_of(r.messages.begin(), r.messages.end(), [&](const Message& m) {
            return m.text.find(needle) != std::string::npos;
        });
        if (!found) return false;
    }
    return true;
}

std::string summarize(const ChatRequest& r) {
    std::string last = r.last_user();
    if (last.size() > 80) last = last.substr(0, 77) + "...";
    std::replace(last.begin(), last.end(), '\n', ' ');
    return std::string(to_string(r.role.role)) + " '" + last + "'";
}

}  // namespace

std::string fill_template(std::string_view tmpl, const ChatRequest& request) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                if (auto value = placeholder(tmpl.substr(i + 1, close - i - 1), request)) {
                    out += *value;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

std::string scripted_lookup(const std::vector<ScriptRule>& script, const ChatRequest& request,
                            std::vector<int>* hits) {
    for (std::size_t i = 0; i < script.size(); ++i) {
        const auto& rule = script[i];
        if (!rule_matches(rule, request)) continue;
        int n = 0;
        if (hits) {
            if (hits->size() < script.size()) hits->resize(script.size(), 0);
            n = (*hits)[i]++;
        }
        if (n < rule.fail_times) throw TransportError("scripted failure " + std::to_string(n + 1));
        if (rule.responder) return rule.responder(request);
        if (!rule.responses.empty()) {
            auto k = static_cast<std::size_t>(n - rule.fail_times);
            return fill_template(rule.responses[std::min(k, rule.responses.size() - 1)], request);
        }
        return fill_template(rule.response, request);
    }
    throw NoRuleMatchedError(summarize(request));
}

ScriptedTransport::ScriptedTransport(std::vector<ScriptRule> script)
    : script_(std::move(script)), hits_(script_.size(), 0) {}

ChatResponse ScriptedTransport::send(const ChatRequest& request) {
    std::string text;
    {
        std::lock_guard lock(mutex_);
        text = scripted_lookup(script_, request, &hits_);
    }
    ChatResponse response;
    response.usage.input_units = static_cast<std::int64_t>(request.total_chars());
    response.usage.output_units = static_cast<std::int64_t>(text.size());
    response.text = std::move(text);
    return response;
}

// ---- http ------------------------------------------------------------------

HttpTransport::HttpTransport(Options options) : options_(std::move(options)) {
    const auto& url = options_.url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint url '" + url + "' has no scheme");
    auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::string HttpTransport::request_body(const ChatRequest& request) {
    json body;
    body["model"] = request.role.model_id;
    json messages = json::array();
    for (const auto& m : request.messages)
        messages.push_back({{"role", to_string(m.speaker)}, {"content", m.text}});
    body["messages"] = std::move(messages);
    body["temperature"] = request.role.temperature;
    // Character budget expressed as tokens at roughly four characters each.
    body["max_tokens"] = (request.role.max_output_chars + 3) / 4;
    if (request.seed) body["seed"] = *request.seed;
    return body.dump();
}

ChatResponse HttpTransport::parse_response(std::string_view body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw ProtocolError("response is not JSON");
    try {
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw ProtocolError("message content is not a string");
        ChatResponse r;
        r.text = content.get<std::string>();
        if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
            r.usage.input_units = u->value("prompt_tokens", std::int64_t{0});
            r.usage.output_units = u->value("completion_tokens", std::int64_t{0});
        }
        return r;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("unexpected response shape: ") + e.what());
    }
}

ChatResponse HttpTransport::send(const ChatRequest& request) {
    httplib::Client client(scheme_host_port_);
    auto secs = static_cast<time_t>(options_.timeout.count());
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);

    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    auto res = client.Post(path_, headers, request_body(request), "application/json");
    if (!res) throw TransportError(httplib::to_string(res.error()));
    if (res->status == 408 || res->status == 429 || res->status >= 500)
        throw TransportError("HTTP " + std::to_string(res->status));
    if (res->status != 200)
        throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200),
                             /*retryable=*/false);
    return parse_response(res->body);
}

// ---- gateway ---------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::delay_after(int attempt) const {
    double ms = static_cast<double>(base_delay.count()) * std::pow(factor, attempt - 1);
    return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(ms)));
}

Gateway::Gateway(std::shared_ptr<Transport> transport, GatewayOptions options)
    : transport_(std::move(transport)),
      options_(std::move(options)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options_.parallelism))) {
    if (options_.parallelism == 0) options_.parallelism = 1;
    if (options_.retry.max_attempts < 1 || options_.retry.max_attempts > 5)
        throw ConfigError("retry attempts must lie in [1, 5]");
    if (!options_.sleeper)
        options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (options_.cache_dir) std::filesystem::create_directories(*options_.cache_dir);
}

std::optional<ChatResponse> Gateway::cache_get(const CacheKey& key) {
    auto hex = key.hex();
    {
        std::lock_guard lock(mutex_);
        if (auto it = memory_cache_.find(hex); it != memory_cache_.end()) return it->second;
    }
    if (!options_.cache_dir) return std::nullopt;
    std::ifstream in(*options_.cache_dir / (hex + ".json"), std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    json j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded() || !j.contains("text") || !j["text"].is_string()) return std::nullopt;
    ChatResponse r;
    r.text = j["text"].get<std::string>();
    if (j.contains("usage")) {
        r.usage.input_units = j["usage"].value("input_units", std::int64_t{0});
        r.usage.output_units = j["usage"].value("output_units", std::int64_t{0});
    }
    std::lock_guard lock(mutex_);
    memory_cache_.emplace(hex, r);
    return r;
}

void Gateway::cache_put(const CacheKey& key, const ChatResponse& response) {
    auto hex = key.hex();
    {
        std::lock_guard lock(mutex_);
        memory_cache_[hex] = response;
    }
    if (!options_.cache_dir) return;
    json j = {{"text", response.text},
              {"usage", {{"input_units", response.usage.input_units},
                         {"output_units", response.usage.output_units}}}};
    auto final_path = *options_.cache_dir / (hex + ".json");
    std::ostringstream tmp_name;
    tmp_name << hex << ".tmp." << ::getpid() << "." << std::this_thread::get_id();
    auto tmp_path = *options_.cache_dir / tmp_name.str();
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) return;  // cache is best effort
        out << j.dump(2) << "\n";
        if (!out) return;
    }
    std::error_code ec;
    std::filesystem::rename(tmp_path, final_path, ec);
    if (ec) std::filesystem::remove(tmp_path, ec);
}

ChatResponse Gateway::send_with_retry(const ChatRequest& request) {
    const auto& policy = options_.retry;
    for (int attempt = 1;; ++attempt) {
        try {
            in_flight_.acquire();
            struct Release {
                std::counting_semaphore<>& s;
                ~Release() { s.release(); }
            } release{in_flight_};
            {
                std::lock_guard lock(mutex_);
                ++stats_.transport_calls;
            }
            return transport_->send(request);
        } catch (const TransportError& e) {
            if (!e.retryable()) throw;
            if (attempt >= policy.max_attempts)
                throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) +
                                         " attempts)",
                                     /*retryable=*/false);
            auto delay = policy.delay_after(attempt);
            {
                std::lock_guard lock(mutex_);
                stats_.backoff_delays.push_back(delay);
            }
            options_.sleeper(delay);
        }
    }
}

ChatResponse Gateway::complete(const ChatRequest& request) {
    if (request.messages.empty()) throw ProtocolError("request has no messages");
    if (auto n = request.total_chars(); n > options_.max_request_chars)
        throw OverlongError(n, options_.max_request_chars);

    {
        std::lock_guard lock(mutex_);
        ++stats_.calls;
        ++stats_.by_role[std::string(to_string(request.role.role))];
        if (!request.tag.empty()) ++stats_.by_tag[request.tag];
    }

    std::optional<CacheKey> key;
    if (options_.cache_enabled) {
        key = cache_key(request);
        if (auto hit = cache_get(*key)) {
            std::lock_guard lock(mutex_);
            ++stats_.cache_hits;
            hit->cached = true;
            return *hit;
        }
    }

    ChatResponse response = send_with_retry(request);
    response.cached = false;
    if (key) cache_put(*key, response);
    return response;
}

CallStats Gateway::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

void Gateway::reset_stats() {
    std::lock_guard lock(mutex_);
    stats_ = {};
}

std::string Gateway::ask(const BackendRole& role, std::string_view system, std::string_view user,
                         std::string_view tag, std::optional<std::int64_t> seed) {
    ChatRequest req;
    req.role = role;
    if (!system.empty()) req.messages.push_back({Speaker::system, std::string(system)});
    req.messages.push_back({Speaker::user, std::string(user)});
    req.seed = seed;
    req.tag = std::string(tag);
    return complete(req).text;
}

}  // namespace promptforge
