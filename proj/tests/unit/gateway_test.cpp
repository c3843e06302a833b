#include <atomic>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "promptforge/gateway.hpp"
#include "testkit.hpp"

using namespace promptforge;
using pf_test::quiet_options;
using pf_test::TempDir;

namespace {

ChatRequest request(Role role, std::string user, std::string system = {}) {
    ChatRequest r;
    r.role = default_backend_role(role);
    if (!system.empty()) r.messages.push_back({Speaker::system, std::move(system)});
    r.messages.push_back({Speaker::user, std::move(user)});
    return r;
}

ScriptRule rule(std::optional<Role> role, std::vector<std::string> contains, std::string response) {
    ScriptRule r;
    r.role = role;
    r.contains = std::move(contains);
    r.response = std::move(response);
    return r;
}

class FlakyTransport : public Transport {
public:
    FlakyTransport(int failures, bool retryable) : failures_(failures), retryable_(retryable) {}
    ChatResponse send(const ChatRequest& r) override {
        ++attempts;
        if (attempts <= failures_) throw TransportError("flaky", retryable_);
        return {"ok:" + r.last_user(), {}, false};
    }
    std::atomic<int> attempts{0};

private:
    int failures_;
    bool retryable_;
};

}  // namespace

TEST(BackendRole, Defaults) {
    EXPECT_EQ(default_backend_role(Role::extractor).temperature, 0.0);
    EXPECT_EQ(default_backend_role(Role::generator).temperature, 0.7);
    EXPECT_EQ(default_backend_role(Role::agent).temperature, 0.0);
    EXPECT_EQ(default_backend_role(Role::judge).temperature, 0.0);
}

TEST(BackendRole, NormalizationForcesJudgeTemperatureAndValidates) {
    auto judge = default_backend_role(Role::judge);
    judge.temperature = 0.9;
    EXPECT_EQ(normalized(judge).temperature, 0.0);
    auto gen = default_backend_role(Role::generator);
    gen.temperature = 2.5;
    EXPECT_THROW(normalized(gen), ConfigError);
    gen.temperature = -0.1;
    EXPECT_THROW(normalized(gen), ConfigError);
    gen.temperature = 1.0;
    gen.max_output_chars = 0;
    EXPECT_THROW(normalized(gen), ConfigError);
}

TEST(ScriptedLookup, JudgeRuleReturnsTemplate) {
    std::vector<ScriptRule> script{rule(Role::judge, {"SCORE"}, "0.8")};
    EXPECT_EQ(scripted_lookup(script, request(Role::judge, "end with SCORE: <v>")), "0.8");
}

TEST(ScriptedLookup, NoMatchThrows) {
    std::vector<ScriptRule> script{rule(Role::judge, {"SCORE"}, "0.8")};
    EXPECT_THROW(scripted_lookup(script, request(Role::agent, "SCORE")), NoRuleMatchedError);
    EXPECT_THROW(scripted_lookup(script, request(Role::judge, "nothing")), NoRuleMatchedError);
}

TEST(ScriptedLookup, LastUserPlaceholderEchoes) {
    std::vector<ScriptRule> script{rule(std::nullopt, {}, "{last_user}")};
    EXPECT_EQ(scripted_lookup(script, request(Role::agent, "hello there")), "hello there");
}

TEST(ScriptedLookup, FirstMatchingRuleWins) {
    std::vector<ScriptRule> script{rule(Role::agent, {"a", "b"}, "both"), rule(Role::agent, {"a"}, "one")};
    EXPECT_EQ(scripted_lookup(script, request(Role::agent, "a b")), "both");
    EXPECT_EQ(scripted_lookup(script, request(Role::agent, "a only")), "one");
}

TEST(ScriptedLookup, ContainsMatchesAnyMessage) {
    std::vector<ScriptRule> script{rule(std::nullopt, {"SYS", "USR"}, "hit")};
    EXPECT_EQ(scripted_lookup(script, request(Role::agent, "USR", "SYS")), "hit");
}

TEST(ScriptedLookup, SeedMatcher) {
    auto r = rule(std::nullopt, {}, "seeded {seed}");
    r.seed = 3;
    std::vector<ScriptRule> script{r, rule(std::nullopt, {}, "fallback")};
    auto req = request(Role::agent, "q");
    EXPECT_EQ(scripted_lookup(script, req), "fallback");
    req.seed = 3;
    EXPECT_EQ(scripted_lookup(script, req), "seeded 3");
}

TEST(FillTemplate, Placeholders) {
    auto req = request(Role::generator,
                       "Example id: q7\nstuff\nBEGIN CURRENT\n{\"a\": \"b\"}\nEND CURRENT\nAnswer: yes", "SYS");
    req.seed = 11;
    EXPECT_EQ(fill_template("{system}", req), "SYS");
    EXPECT_EQ(fill_template("{current}", req), "{\"a\": \"b\"}");
    EXPECT_EQ(fill_template("{line:Example id}", req), "q7");
    EXPECT_EQ(fill_template("{after:Answer:}", req), "yes");
    EXPECT_EQ(fill_template("s={seed}", req), "s=11");
    EXPECT_EQ(fill_template("{unknown} {", req), "{unknown} {");
}

TEST(ScriptedLookup, ResponsesAreConsumedInOrderThenRepeat) {
    ScriptRule r;
    r.responses = {"one", "two"};
    ScriptedTransport t({r});
    auto req = request(Role::agent, "q");
    EXPECT_EQ(t.send(req).text, "one");
    EXPECT_EQ(t.send(req).text, "two");
    EXPECT_EQ(t.send(req).text, "two");
}

TEST(CacheKey, StableAndSensitive) {
    auto a = request(Role::agent, "hello", "sys");
    EXPECT_EQ(cache_key(a), cache_key(a));
    EXPECT_EQ(cache_key(a).hex().size(), 64u);

    auto temp = a;
    temp.role.temperature = 0.5;
    EXPECT_NE(cache_key(a), cache_key(temp));

    auto order = a;
    std::swap(order.messages[0], order.messages[1]);
    EXPECT_NE(cache_key(a), cache_key(order));

    auto model = a;
    model.role.model_id = "other";
    EXPECT_NE(cache_key(a), cache_key(model));

    auto seeded = a;
    seeded.seed = 1;
    EXPECT_NE(cache_key(a), cache_key(seeded));

    auto tagged = a;
    tagged.tag = "something";
    EXPECT_EQ(cache_key(a), cache_key(tagged));
}

TEST(CacheKey, KnownDigest) {
    // Frozen after the first run; guards the key encoding across releases.
    auto r = request(Role::agent, "hello");
    EXPECT_EQ(cache_key(r).hex(), sha256_hex(R"(["pf-cache-v1","default",0.0,null,[["user","hello"]]])"));
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Gateway, EchoRule) {
    Gateway gw(std::make_shared<ScriptedTransport>(std::vector<ScriptRule>{rule(std::nullopt, {}, "{last_user}")}),
               quiet_options());
    EXPECT_EQ(gw.complete(request(Role::agent, "ping")).text, "ping");
}

TEST(Gateway, SecondIdenticalRequestIsCached) {
    auto counting = std::make_shared<pf_test::CountingTransport>(
        std::make_shared<ScriptedTransport>(std::vector<ScriptRule>{rule(std::nullopt, {}, "{last_user}")}));
    Gateway gw(counting, quiet_options());
    auto first = gw.complete(request(Role::agent, "ping"));
    auto second = gw.complete(request(Role::agent, "ping"));
    EXPECT_FALSE(first.cached);
    EXPECT_TRUE(second.cached);
    EXPECT_EQ(second.text, "ping");
    EXPECT_EQ(counting->sends(), 1);
    EXPECT_EQ(gw.stats().cache_hits, 1);
    EXPECT_EQ(gw.stats().calls, 2);
}

TEST(Gateway, DiskCacheSurvivesRestart) {
    TempDir dir;
    auto make = [&](std::shared_ptr<Transport> t) {
        auto o = quiet_options();
        o.cache_dir = dir.path() / "cache";
        return Gateway(std::move(t), o);
    };
    auto inner = std::make_shared<ScriptedTransport>(std::vector<ScriptRule>{rule(std::nullopt, {}, "v1")});
    {
        auto gw = make(inner);
        EXPECT_EQ(gw.complete(request(Role::agent, "q")).text, "v1");
    }
    auto key = cache_key(request(Role::agent, "q")).hex();
    auto path = dir.path() / "cache" / (key + ".json");
    ASSERT_TRUE(fs::exists(path));
    auto stored = nlohmann::json::parse(read_file(path));
    EXPECT_EQ(stored["text"], "v1");
    EXPECT_TRUE(stored.contains("usage"));

    auto counting = std::make_shared<pf_test::CountingTransport>(inner);
    auto gw = make(counting);
    auto r = gw.complete(request(Role::agent, "q"));
    EXPECT_TRUE(r.cached);
    EXPECT_EQ(r.text, "v1");
    EXPECT_EQ(counting->sends(), 0);
}

TEST(Gateway, CacheCanBeDisabled) {
    auto counting = std::make_shared<pf_test::CountingTransport>(
        std::make_shared<ScriptedTransport>(std::vector<ScriptRule>{rule(std::nullopt, {}, "x")}));
    auto o = quiet_options();
    o.cache_enabled = false;
    Gateway gw(counting, o);
    gw.complete(request(Role::agent, "q"));
    gw.complete(request(Role::agent, "q"));
    EXPECT_EQ(counting->sends(), 2);
}

TEST(Gateway, RetriesTransientFailures) {
    auto r = rule(std::nullopt, {}, "fine");
    r.fail_times = 2;
    Gateway gw(std::make_shared<ScriptedTransport>(std::vector<ScriptRule>{r}), quiet_options());
    EXPECT_EQ(gw.complete(request(Role::agent, "q")).text, "fine");
    auto s = gw.stats();
    EXPECT_EQ(s.transport_calls, 3);
    EXPECT_EQ(s.calls, 1);
    ASSERT_EQ(s.backoff_delays.size(), 2u);
}

TEST(Gateway, GivesUpAfterFiveAttemptsWithGrowingBackoff) {
    auto flaky = std::make_shared<FlakyTransport>(100, true);
    auto o = quiet_options();
    o.retry = RetryPolicy{};  // production defaults: 5 attempts, 1s base, factor 2
    std::vector<std::chrono::milliseconds> slept;
    o.sleeper = [&](std::chrono::milliseconds d) { slept.push_back(d); };
    Gateway gw(flaky, o);
    EXPECT_THROW(gw.complete(request(Role::agent, "q")), TransportError);
    EXPECT_EQ(flaky->attempts.load(), 5);
    using ms = std::chrono::milliseconds;
    EXPECT_EQ(slept, (std::vector<ms>{ms(1000), ms(2000), ms(4000), ms(8000)}));
    for (std::size_t i = 1; i < slept.size(); ++i) EXPECT_GE(slept[i], slept[i - 1]);
}

TEST(Gateway, NonRetryableFailsImmediately) {
    auto flaky = std::make_shared<FlakyTransport>(1, false);
    Gateway gw(flaky, quiet_options());
    EXPECT_THROW(gw.complete(request(Role::agent, "q")), TransportError);
    EXPECT_EQ(flaky->attempts.load(), 1);
}

TEST(Gateway, ProtocolErrorsAreNotRetried) {
    class Bad : public Transport {
    public:
        ChatResponse send(const ChatRequest&) override {
            ++n;
            throw ProtocolError("garbage");
        }
        int n = 0;
    };
    auto bad = std::make_shared<Bad>();
    Gateway gw(bad, quiet_options());
    EXPECT_THROW(gw.complete(request(Role::agent, "q")), ProtocolError);
    EXPECT_EQ(bad->n, 1);
}

TEST(Gateway, RejectsOverlongAndEmptyRequests) {
    auto o = quiet_options();
    o.max_request_chars = 10;
    Gateway gw(std::make_shared<ScriptedTransport>(std::vector<ScriptRule>{rule(std::nullopt, {}, "x")}), o);
    EXPECT_THROW(gw.complete(request(Role::agent, "01234567890")), OverlongError);
    EXPECT_NO_THROW(gw.complete(request(Role::agent, "0123456789")));
    ChatRequest empty;
    EXPECT_THROW(gw.complete(empty), ProtocolError);
    EXPECT_EQ(RetryPolicy{}.max_attempts, 5);
    EXPECT_EQ(GatewayOptions{}.max_request_chars, 100000u);
    EXPECT_EQ(GatewayOptions{}.parallelism, 8u);
}

TEST(Gateway, BoundsInFlightCalls) {
    class Slow : public Transport {
    public:
        ChatResponse send(const ChatRequest& r) override {
            int now = ++active;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            --active;
            return {r.last_user(), {}, false};
        }
        std::atomic<int> active{0}, peak{0};
    };
    auto slow = std::make_shared<Slow>();
    Gateway gw(slow, quiet_options(3));
    std::vector<std::jthread> threads;
    for (int i = 0; i < 16; ++i)
        threads.emplace_back([&, i] { gw.complete(request(Role::agent, "q" + std::to_string(i))); });
    threads.clear();
    EXPECT_LE(slow->peak.load(), 3);
    EXPECT_GE(slow->peak.load(), 1);
}

TEST(HttpTransport, RequestBodyShape) {
    auto r = request(Role::generator, "hi", "sys");
    r.seed = 4;
    r.role.model_id = "m1";
    auto body = nlohmann::json::parse(HttpTransport::request_body(r));
    EXPECT_EQ(body["model"], "m1");
    EXPECT_EQ(body["temperature"], 0.7);
    EXPECT_EQ(body["seed"], 4);
    EXPECT_EQ(body["max_tokens"], 1000);
    ASSERT_EQ(body["messages"].size(), 2u);
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][1]["content"], "hi");
}

TEST(HttpTransport, ParseResponse) {
    auto r = HttpTransport::parse_response(
        R"({"choices":[{"message":{"role":"assistant","content":"hello"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}})");
    EXPECT_EQ(r.text, "hello");
    EXPECT_EQ(r.usage.input_units, 3);
    EXPECT_EQ(r.usage.output_units, 1);
    EXPECT_THROW(HttpTransport::parse_response("nope"), ProtocolError);
    EXPECT_THROW(HttpTransport::parse_response(R"({"choices":[]})"), ProtocolError);
    EXPECT_THROW(HttpTransport::parse_response(R"({"choices":[{"message":{"content":null}}]})"), ProtocolError);
}

TEST(HttpTransport, TalksToLocalServer) {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string seen_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        int n = ++hits;
        seen_auth = req.get_header_value("Authorization");
        if (n == 1) {
            res.status = 503;
            return;
        }
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json reply = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "echo " + body["messages"].back()["content"].get<std::string>()}}}}}},
            {"usage", {{"prompt_tokens", 5}, {"completion_tokens", 2}}}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
        res.status = 400;
        res.set_content("bad request", "text/plain");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    auto transport = std::make_shared<HttpTransport>(HttpTransport::Options{base + "/v1/chat/completions", "k123", std::chrono::seconds(5)});
    Gateway gw(transport, quiet_options());
    auto r = gw.complete(request(Role::agent, "ping"));
    EXPECT_EQ(r.text, "echo ping");
    EXPECT_EQ(r.usage.input_units, 5);
    EXPECT_EQ(hits.load(), 2);
    EXPECT_EQ(gw.stats().transport_calls, 2);
    EXPECT_EQ(seen_auth, "Bearer k123");

    auto bad = std::make_shared<HttpTransport>(HttpTransport::Options{base + "/bad", "", std::chrono::seconds(5)});
    Gateway gw_bad(bad, quiet_options());
    EXPECT_THROW(gw_bad.complete(request(Role::agent, "ping")), TransportError);
    EXPECT_EQ(gw_bad.stats().transport_calls, 1);

    server.stop();
    t.join();
}

TEST(HttpTransport, ClosedPortIsRetryableTransportError) {
    int port = pf_test::closed_port();
    HttpTransport t({"http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "", std::chrono::seconds(2)});
    try {
        t.send(request(Role::agent, "q"));
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_TRUE(e.retryable());
    }
}

TEST(HttpTransport, RejectsUrlWithoutScheme) {
    EXPECT_THROW(HttpTransport({"localhost:8000", "", std::chrono::seconds(1)}), ConfigError);
}
