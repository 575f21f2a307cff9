#include "doctest.h"

#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "binsum/common/parallel.hpp"
#include "binsum/llm/embeddings.hpp"
#include "binsum/llm/gateway.hpp"
#include "binsum/metrics/metrics.hpp"
#include "../support/mock_server.hpp"

using namespace binsum;
using namespace binsum::llm;
namespace fs = std::filesystem;

namespace {

const std::string kPrompt =
    "Imagine you are a skilled binary reverse engineer. I will provide you with a binary function, and your task "
    "is to analyze it thoroughly, explain its underlying functionality, and then deliver a succinct and "
    "informative summary of its operation.";

std::shared_ptr<Transport> transport_for(const mock::ChatServer& server) {
    return std::make_shared<HttpTransport>(EndpointConfig{server.base(), "sk-test", std::chrono::seconds(10)});
}

GatewayOptions fast_options(std::vector<std::chrono::milliseconds>* sleeps = nullptr) {
    GatewayOptions o;
    o.base_backoff = std::chrono::milliseconds(10);
    o.max_backoff = std::chrono::milliseconds(200);
    o.sleep = [sleeps](std::chrono::milliseconds d) {
        if (sleeps) sleeps->push_back(d);
    };
    return o;
}

fs::path temp_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    return d;
}

std::size_t count_files(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) ++n;
    return n;
}

}  // namespace

TEST_CASE("completion parameter defaults") {
    CompletionParams p;
    CHECK(p.temperature == 0.1);
    CHECK(p.top_p == 1.0);
    CHECK(p.n == 1);
    CHECK_FALSE(p.max_tokens.has_value());
    CHECK(PromptMode::few_shot().shots == 2);
    p.top_p = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.temperature = -1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("prompt modes parse and print") {
    CHECK(parse_prompt_mode("zero_shot") == PromptMode::zero_shot());
    CHECK(parse_prompt_mode("few_shot") == PromptMode::few_shot(2));
    CHECK(parse_prompt_mode("few_shot:3") == PromptMode::few_shot(3));
    CHECK(parse_prompt_mode("cot") == PromptMode::chain_of_thought());
    CHECK(to_string(PromptMode::few_shot(3)) == "few_shot:3");
    CHECK_THROWS_AS(parse_prompt_mode("few_shot:0"), ConfigError);
    CHECK_THROWS_AS(parse_prompt_mode("many"), ConfigError);
}

TEST_CASE("zero-shot body layout") {
    auto r = assemble_request(kPrompt, "int f(void) { return 1; }", PromptMode::zero_shot(), 12);
    CHECK(r.instruction == kPrompt + " Summarize the function in 12 words.");
    CHECK(r.body == r.instruction + "\n\nInput decompiled code:\nint f(void) { return 1; }\nFunction Summary:");
    CHECK(r.body.find("in 12 words") != std::string::npos);
    auto count = [&](const std::string& needle) {
        std::size_t n = 0;
        for (auto pos = r.body.find(needle); pos != std::string::npos; pos = r.body.find(needle, pos + 1)) ++n;
        return n;
    };
    CHECK(count("Input decompiled code:") == 1);
    CHECK(count("Function Summary:") == 1);
}

TEST_CASE("word-limit placeholder") {
    CHECK(instruction_with_limit("Describe it in {word_limit} words, max {word_limit}.", 7) ==
          "Describe it in 7 words, max 7.");
    CHECK_THROWS_AS(instruction_with_limit("x", 0), ValidationError);
}

TEST_CASE("few-shot demos appear in order before the test code") {
    std::vector<Demo> demos = {{"void d1(void) {}", "First demo."}, {"void d2(void) {}", "Second demo."}};
    auto r = assemble_request(kPrompt, "void test(void) {}", PromptMode::few_shot(2), 10, demos, {}, "assembly");
    auto p1 = r.body.find("void d1(void) {}");
    auto s1 = r.body.find("Function Summary: First demo.");
    auto p2 = r.body.find("void d2(void) {}");
    auto pt = r.body.find("void test(void) {}");
    REQUIRE(p1 != std::string::npos);
    REQUIRE(p2 != std::string::npos);
    REQUIRE(pt != std::string::npos);
    CHECK(p1 < s1);
    CHECK(s1 < p2);
    CHECK(p2 < pt);
    CHECK(r.body.find("Input assembly code:") < p1);
    CHECK(r.body.substr(r.body.size() - 17) == "Function Summary:");

    CHECK_THROWS_AS(assemble_request(kPrompt, "void d2(void) {}", PromptMode::few_shot(2), 10, demos), LeakageError);
    CHECK_THROWS_AS(assemble_request(kPrompt, "x", PromptMode::few_shot(2), 10, {demos[0]}), ValidationError);
    CHECK_THROWS_AS(assemble_request(kPrompt, "x", PromptMode::zero_shot(), 10, demos), ValidationError);
}

TEST_CASE("assemble_request is pure and keys are content hashes") {
    auto a = assemble_request(kPrompt, "code", PromptMode::zero_shot(), 10);
    auto b = assemble_request(kPrompt, "code", PromptMode::zero_shot(), 10);
    CHECK(a.body == b.body);
    CHECK(a.cache_key == b.cache_key);
    CHECK(a.cache_key.size() == 64);
    CompletionParams hot;
    hot.temperature = 0.7;
    CHECK(assemble_request(kPrompt, "code", PromptMode::zero_shot(), 10, {}, hot).cache_key != a.cache_key);
    CHECK(assemble_request(kPrompt, "code", PromptMode::zero_shot(), 11).cache_key != a.cache_key);
    CHECK(assemble_request(kPrompt, "code2", PromptMode::zero_shot(), 10).cache_key != a.cache_key);
    CompletionParams other;
    other.model = "gpt-4";
    CHECK(assemble_request(kPrompt, "code", PromptMode::zero_shot(), 10, {}, other).cache_key != a.cache_key);
}

TEST_CASE("token approximation") {
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("12345678") == 2);
    CHECK(count_tokens("123456789") == 3);
    CHECK(count_tokens("é") == 1);
}

TEST_CASE("wire format and response parsing") {
    auto r = assemble_request(kPrompt, "code", PromptMode::zero_shot(), 10);
    auto j = nlohmann::json::parse(OpenAiChatClient::request_json(r));
    CHECK(j["model"] == "mock");
    CHECK(j["temperature"] == 0.1);
    CHECK(j["top_p"] == 1.0);
    CHECK(j["n"] == 1);
    CHECK(j["messages"][0]["role"] == "user");
    CHECK(j["messages"][0]["content"] == r.body);
    CHECK_FALSE(j.contains("max_tokens"));

    HttpResponse ok{200, R"({"choices":[{"message":{"content":"Sums."}}]})", {}};
    auto resp = OpenAiChatClient::parse_response(r, ok);
    CHECK(resp.text == "Sums.");
    CHECK_FALSE(resp.usage.exact);
    CHECK(resp.usage.input_tokens == count_tokens(r.body));
    HttpResponse exact{200, R"({"choices":[{"message":{"content":"Sums."}}],"usage":{"prompt_tokens":40,"completion_tokens":2}})", {}};
    auto e = OpenAiChatClient::parse_response(r, exact);
    CHECK(e.usage.exact);
    CHECK(e.usage.input_tokens == 40);
    CHECK(e.usage.output_tokens == 2);

    CHECK_THROWS_AS(OpenAiChatClient::parse_response(r, {401, "", {}}), AuthError);
    CHECK_THROWS_AS(OpenAiChatClient::parse_response(r, {429, "", {}}), RateLimitedError);
    CHECK_THROWS_AS(OpenAiChatClient::parse_response(r, {400, "bad", {}}), RequestRejectedError);
    CHECK_THROWS_AS(OpenAiChatClient::parse_response(r, {200, "<html>", {}}), MalformedResponseError);
    CHECK_THROWS_AS(OpenAiChatClient::parse_response(r, {200, R"({"choices":[]})", {}}), MalformedResponseError);
    try {
        OpenAiChatClient::parse_response(r, {429, "", {{"retry-after", "3"}}});
    } catch (const RateLimitedError& err) {
        CHECK(err.retry_after() == std::optional<double>(3.0));
    }
}

TEST_CASE("error categories are distinct") {
    std::set<std::string> cats = {AuthError("").category(), RetriesExhaustedError("").category(),
                                  MalformedResponseError("").category(), TransportError("").category(),
                                  RequestRejectedError("").category()};
    CHECK(cats.size() == 5);
}

TEST_CASE("cache hit performs no network call") {
    mock::ChatServer server;
    auto client = std::make_shared<OpenAiChatClient>(transport_for(server), "sk-test");
    auto dir = temp_dir("binsum-cache-hit");
    auto cache = std::make_shared<FileResponseCache>(dir);
    Gateway gw(client, cache, fast_options());
    auto req = assemble_request(kPrompt, "int f(void);", PromptMode::zero_shot(), 10);
    auto first = gw.complete(req);
    CHECK_FALSE(first.from_cache);
    CHECK(first.usage.exact);
    CHECK(server.requests() == 1);
    CHECK(server.last_auth() == "Bearer sk-test");
    CHECK(fs::exists(dir / (req.cache_key + ".json")));

    auto second = gw.complete(req);
    CHECK(second.from_cache);
    CHECK(second.text == first.text);
    CHECK(second.usage.input_tokens == first.usage.input_tokens);
    CHECK(server.requests() == 1);

    // A fresh gateway over the same directory also hits.
    Gateway gw2(client, std::make_shared<FileResponseCache>(dir), fast_options());
    CHECK(gw2.complete(req).text == first.text);
    CHECK(server.requests() == 1);
    CHECK(gw2.stats().cache_hits == 1);
    CHECK(gw2.stats().network_calls == 0);
    fs::remove_all(dir);
}

TEST_CASE("rate limit then success: one retry with backoff") {
    mock::ChatServer server;
    server.script({429, R"({"error":"slow down"})", ""});
    auto client = std::make_shared<OpenAiChatClient>(transport_for(server), "sk-test");
    std::vector<std::chrono::milliseconds> sleeps;
    Gateway gw(client, std::make_shared<MemoryResponseCache>(), fast_options(&sleeps));
    auto resp = gw.complete(assemble_request(kPrompt, "x", PromptMode::zero_shot(), 5));
    CHECK(resp.text.rfind("summary of", 0) == 0);
    CHECK(server.requests() == 2);
    CHECK(gw.stats().retries == 1);
    REQUIRE(sleeps.size() == 1);
    CHECK(sleeps[0] == std::chrono::milliseconds(10));
}

TEST_CASE("backoff doubles, honours Retry-After and caps") {
    mock::ChatServer server;
    server.script({429, "", ""});
    server.script({429, "", "0.05"});
    server.script({503, "", ""});
    auto client = std::make_shared<OpenAiChatClient>(transport_for(server), "");
    std::vector<std::chrono::milliseconds> sleeps;
    Gateway gw(client, nullptr, fast_options(&sleeps));
    gw.complete(assemble_request(kPrompt, "x", PromptMode::zero_shot(), 5));
    CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(10),
                                                            std::chrono::milliseconds(50),
                                                            std::chrono::milliseconds(40)});
    CHECK(gw.backoff_for(20, std::nullopt) == std::chrono::milliseconds(200));
}

TEST_CASE("retries exhausted is its own error and nothing is cached") {
    mock::ChatServer server;
    for (int i = 0; i < 3; ++i) server.script({429, "", ""});
    auto client = std::make_shared<OpenAiChatClient>(transport_for(server), "");
    auto cache = std::make_shared<MemoryResponseCache>();
    auto opts = fast_options();
    opts.max_retries = 2;
    Gateway gw(client, cache, opts);
    CHECK_THROWS_AS(gw.complete(assemble_request(kPrompt, "x", PromptMode::zero_shot(), 5)), RetriesExhaustedError);
    CHECK(server.requests() == 3);
    CHECK(cache->size() == 0);
}

TEST_CASE("malformed responses and auth failures are not cached") {
    mock::ChatServer server;
    server.script({200, "this is not json", ""});
    server.script({401, R"({"error":"bad key"})", ""});
    auto client = std::make_shared<OpenAiChatClient>(transport_for(server), "sk-wrong");
    auto dir = temp_dir("binsum-cache-malformed");
    auto cache = std::make_shared<FileResponseCache>(dir);
    Gateway gw(client, cache, fast_options());
    auto req = assemble_request(kPrompt, "x", PromptMode::zero_shot(), 5);
    CHECK_THROWS_AS(gw.complete(req), MalformedResponseError);
    CHECK(count_files(dir) == 0);
    CHECK_THROWS_AS(gw.complete(req), AuthError);
    CHECK(count_files(dir) == 0);
    CHECK(server.requests() == 2);
    CHECK(gw.complete(req).text.rfind("summary of", 0) == 0);
    CHECK(count_files(dir) == 1);
    fs::remove_all(dir);
}

TEST_CASE("transport failures surface as transport errors") {
    auto t = std::make_shared<HttpTransport>(EndpointConfig{"http://127.0.0.1:1/v1", "", std::chrono::seconds(2)});
    auto client = std::make_shared<OpenAiChatClient>(t, "");
    Gateway gw(client, nullptr, fast_options());
    CHECK_THROWS_AS(gw.complete(assemble_request(kPrompt, "x", PromptMode::zero_shot(), 5)), TransportError);
    CHECK_THROWS_AS(HttpTransport(EndpointConfig{"127.0.0.1:80", "", {}}), ConfigError);
}

TEST_CASE("in-flight requests never exceed the bound") {
    for (std::size_t bound : {std::size_t{5}, std::size_t{2}}) {
        mock::ChatServer server(std::chrono::milliseconds(40));
        auto client = std::make_shared<OpenAiChatClient>(transport_for(server), "");
        auto opts = fast_options();
        opts.max_in_flight = bound;
        Gateway gw(client, nullptr, opts);
        parallel_for(24, 12, [&](std::size_t i) {
            gw.complete(assemble_request(kPrompt, "code " + std::to_string(i), PromptMode::zero_shot(), 5));
        });
        CHECK(server.requests() == 24);
        CHECK(server.max_in_flight() <= static_cast<int>(bound));
        CHECK(server.max_in_flight() == static_cast<int>(bound));  // the bound is actually reached
    }
    CHECK(GatewayOptions{}.max_in_flight == 5);
}

TEST_CASE("chain of thought: explanation feeds the summary query") {
    std::vector<std::string> bodies;
    std::mutex mu;
    auto model = std::make_shared<MockChatModel>([&](const Request& r) {
        std::lock_guard lock(mu);
        bodies.push_back(r.body);
        return bodies.size() == 1 ? std::string("EXPLANATION-E walks the list") : std::string("SUMMARY-S");
    });
    Gateway gw(model, nullptr, fast_options());
    auto out = run_cot(gw, kPrompt, "int walk(node *n);", 9);
    CHECK(out.summary == "SUMMARY-S");
    CHECK(out.explanation == "EXPLANATION-E walks the list");
    REQUIRE(bodies.size() == 2);
    CHECK(bodies[0].find("Let's think step by step") != std::string::npos);
    CHECK(bodies[1].find("EXPLANATION-E walks the list") != std::string::npos);
    CHECK(bodies[1].find("in 9 words") != std::string::npos);
    CHECK(bodies[1].find("int walk(node *n);") != std::string::npos);
}

TEST_CASE("chain of thought fails as a whole when a query fails") {
    int calls = 0;
    auto model = std::make_shared<MockChatModel>([&](const Request&) -> std::string {
        ++calls;
        throw AuthError("nope");
    });
    Gateway gw(model, nullptr, fast_options());
    CHECK_THROWS_AS(run_cot(gw, kPrompt, "int f(void);", 9), AuthError);
    CHECK(calls == 1);
}

TEST_CASE("chain of thought is deterministic with a deterministic model") {
    auto run = [] {
        Gateway gw(std::make_shared<MockChatModel>(), nullptr, fast_options());
        return run_cot(gw, kPrompt, "int sum_array(const int *values, int n);", 6).summary;
    };
    auto a = run();
    CHECK(a == run());
    CHECK(a == "function int sum array const values");
}

TEST_CASE("mock model fails on the marker") {
    MockChatModel m;
    auto ok = m.send(assemble_request(kPrompt, "int f(void);", PromptMode::zero_shot(), 3));
    CHECK(ok.text == "function int void");
    CHECK_THROWS_AS(m.send(assemble_request(kPrompt, "BINSUM_MOCK_FAIL", PromptMode::zero_shot(), 3)),
                    RequestRejectedError);
}

TEST_CASE("remote embedding provider") {
    mock::ChatServer server;
    RemoteEmbeddingProvider p(transport_for(server), "", "all-mpnet-base-v2");
    auto v = p.pooled("Hello");
    CHECK(v == std::vector<double>{5.0, 1.0, 'H' * 1.0});
    CHECK(p.dim() == 3);
    (void)p.pooled("Hello");
    CHECK(server.requests() == 1);  // memoized
    auto toks = p.embed_tokens({"a", "bb"});
    CHECK(toks.size() == 2);
    CHECK(p.tokenization() == "service");
    CHECK(metrics::semantic_similarity(p, "Hello", "Hello") == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)p.pooled("  "), metrics::EmptySummaryError);
}
