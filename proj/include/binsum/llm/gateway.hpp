#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>

#include "binsum/common/error.hpp"
#include "binsum/llm/request.hpp"

namespace binsum::llm {

// --- errors -----------------------------------------------------------------

class AuthError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "auth"; }
};

class RateLimitedError : public Error {
public:
    RateLimitedError(const std::string& what, std::optional<double> retry_after)
        : Error(what), retry_after_(retry_after) {}
    [[nodiscard]] std::optional<double> retry_after() const noexcept { return retry_after_; }
    [[nodiscard]] const char* category() const noexcept override { return "rate_limited"; }

private:
    std::optional<double> retry_after_;
};

class RetriesExhaustedError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "retries_exhausted"; }
};

class MalformedResponseError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "malformed_response"; }
};

class TransportError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "transport"; }
};

// Non-retryable HTTP status other than auth.
class RequestRejectedError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "rejected"; }
};

// --- responses ---------------------------------------------------------------

struct Usage {
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    bool exact = false;  // reported by the API rather than approximated
};

struct Response {
    std::string text;
    Usage usage;
    bool from_cache = false;
};

// --- transport ---------------------------------------------------------------

struct HttpResponse {
    int status = 0;
    std::string body;
    std::map<std::string, std::string> headers;  // lowercase names
};

class Transport {
public:
    virtual ~Transport() = default;
    // POSTs JSON to base + path. Throws TransportError when no response arrives.
    virtual HttpResponse post_json(const std::string& path, const std::string& body,
                                   const std::map<std::string, std::string>& headers) = 0;
};

struct EndpointConfig {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string api_key;
    std::chrono::seconds timeout{120};

    // BINSUM_API_BASE / BINSUM_API_KEY; missing base -> ConfigError.
    static EndpointConfig from_env();
};

// cpp-httplib client; one connection per call, safe to share across threads.
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(EndpointConfig config);
    HttpResponse post_json(const std::string& path, const std::string& body,
                           const std::map<std::string, std::string>& headers) override;

private:
    EndpointConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

// --- chat clients ------------------------------------------------------------

class ChatClient {
public:
    virtual ~ChatClient() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    // One network round trip. Throws AuthError, RateLimitedError,
    // MalformedResponseError, TransportError or RequestRejectedError.
    virtual Response send(const Request& request) = 0;
};

// Chat-completions wire format (`POST <base>/chat/completions`).
class OpenAiChatClient final : public ChatClient {
public:
    OpenAiChatClient(std::shared_ptr<Transport> transport, std::string api_key);
    [[nodiscard]] std::string name() const override { return "chat-completions"; }
    Response send(const Request& request) override;

    static std::string request_json(const Request& request);
    static Response parse_response(const Request& request, const HttpResponse& http);

private:
    std::shared_ptr<Transport> transport_;
    std::string api_key_;
};

// Deterministic offline model. The default responder answers with the first
// identifiers of the test code; `fail_marker` in the test code makes it
// throw, which exercises partial-failure handling.
class MockChatModel final : public ChatClient {
public:
    using Responder = std::function<std::string(const Request&)>;
    explicit MockChatModel(Responder responder = {}, std::string fail_marker = "BINSUM_MOCK_FAIL");
    [[nodiscard]] std::string name() const override { return "mock"; }
    Response send(const Request& request) override;
    [[nodiscard]] std::size_t calls() const { return calls_.load(); }

    // Code requests: "function" plus the first distinct words of the last code
    // section, padded to the word limit. Meta queries: a fixed numbered list.
    static std::string default_response(const Request& request);

private:
    Responder responder_;
    std::string fail_marker_;
    std::atomic<std::size_t> calls_{0};
};

// --- cache -------------------------------------------------------------------

class ResponseCache {
public:
    virtual ~ResponseCache() = default;
    virtual std::optional<Response> get(const std::string& key) = 0;
    virtual void put(const std::string& key, const Response& response) = 0;
};

// `<dir>/<key>.json`, written atomically; concurrent readers are safe.
class FileResponseCache final : public ResponseCache {
public:
    explicit FileResponseCache(std::filesystem::path dir);
    std::optional<Response> get(const std::string& key) override;
    void put(const std::string& key, const Response& response) override;
    [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

class MemoryResponseCache final : public ResponseCache {
public:
    std::optional<Response> get(const std::string& key) override;
    void put(const std::string& key, const Response& response) override;
    [[nodiscard]] std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, Response> entries_;
};

// --- gateway -----------------------------------------------------------------

struct GatewayOptions {
    std::size_t max_in_flight = 5;
    int max_retries = 5;                               // retries after the first attempt
    std::chrono::milliseconds base_backoff{500};       // doubled per retry
    std::chrono::milliseconds max_backoff{30000};
    // Injected for tests; defaults to std::this_thread::sleep_for.
    std::function<void(std::chrono::milliseconds)> sleep;
};

struct GatewayStats {
    std::size_t requests = 0;
    std::size_t cache_hits = 0;
    std::size_t network_calls = 0;
    std::size_t retries = 0;
    std::size_t failures = 0;
};

class Gateway {
public:
    Gateway(std::shared_ptr<ChatClient> client, std::shared_ptr<ResponseCache> cache, GatewayOptions options = {});

    // Cache lookup, then bounded dispatch with rate-limit backoff. Successful
    // responses are cached; errors never are.
    Response complete(const Request& request);

    [[nodiscard]] GatewayStats stats() const;
    [[nodiscard]] const GatewayOptions& options() const { return options_; }
    [[nodiscard]] std::string client_name() const { return client_->name(); }

    std::chrono::milliseconds backoff_for(int retry, std::optional<double> retry_after) const;

private:
    std::shared_ptr<ChatClient> client_;
    std::shared_ptr<ResponseCache> cache_;
    GatewayOptions options_;
    std::counting_semaphore<1024> slots_;
    std::atomic<std::size_t> requests_{0}, hits_{0}, calls_{0}, retries_{0}, failures_{0};
};

struct CotResult {
    std::string explanation;
    std::string summary;
    Usage usage;  // both queries
};

// Query 1 asks for a step-by-step explanation; its full response is embedded
// verbatim in query 2, which asks for the word-limited summary.
CotResult run_cot(Gateway& gateway, std::string_view prompt, std::string_view code, int word_limit,
                  const CompletionParams& params = {}, std::string_view rep = "decompiled");

}  // namespace binsum::llm
