#include "binsum/llm/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "binsum/common/text.hpp"

namespace binsum::llm {

using nlohmann::json;

// --- chat-completions wire format -------------------------------------------

OpenAiChatClient::OpenAiChatClient(std::shared_ptr<Transport> transport, std::string api_key)
    : transport_(std::move(transport)), api_key_(std::move(api_key)) {}

std::string OpenAiChatClient::request_json(const Request& request) {
    json j;
    j["model"] = request.params.model;
    j["messages"] = json::array({json{{"role", "user"}, {"content", request.body}}});
    j["temperature"] = request.params.temperature;
    j["top_p"] = request.params.top_p;
    j["n"] = request.params.n;
    if (request.params.max_tokens) j["max_tokens"] = *request.params.max_tokens;
    return j.dump();
}

namespace {

std::optional<double> parse_retry_after(const HttpResponse& http) {
    auto it = http.headers.find("retry-after");
    if (it == http.headers.end()) return std::nullopt;
    try {
        std::size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used > 0 && v >= 0 && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    return std::nullopt;  // HTTP-date form: fall back to exponential backoff
}

std::string snippet(const std::string& body) {
    auto s = body.substr(0, 200);
    return sanitize_utf8(s);
}

}  // namespace

Response OpenAiChatClient::parse_response(const Request& request, const HttpResponse& http) {
    if (http.status == 401 || http.status == 403)
        throw AuthError(fmt::format("endpoint rejected credentials (HTTP {})", http.status));
    if (http.status == 429 || http.status == 503)
        throw RateLimitedError(fmt::format("rate limited (HTTP {})", http.status), parse_retry_after(http));
    if (http.status < 200 || http.status >= 300)
        throw RequestRejectedError(fmt::format("HTTP {}: {}", http.status, snippet(http.body)));

    json j;
    try {
        j = json::parse(http.body);
    } catch (const json::exception&) {
        throw MalformedResponseError(fmt::format("response is not JSON: {}", snippet(http.body)));
    }
    Response r;
    try {
        const auto& choices = j.at("choices");
        if (!choices.is_array() || choices.empty()) throw MalformedResponseError("response has no choices");
        const auto& content = choices.at(0).at("message").at("content");
        if (!content.is_string()) throw MalformedResponseError("message content is not a string");
        r.text = content.get<std::string>();
    } catch (const json::exception& e) {
        throw MalformedResponseError(fmt::format("unexpected response shape: {}", e.what()));
    }
    r.usage.input_tokens = count_tokens(request.body);
    r.usage.output_tokens = count_tokens(r.text);
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
        auto p = u->find("prompt_tokens");
        auto c = u->find("completion_tokens");
        if (p != u->end() && c != u->end() && p->is_number_unsigned() && c->is_number_unsigned()) {
            r.usage.input_tokens = p->get<std::size_t>();
            r.usage.output_tokens = c->get<std::size_t>();
            r.usage.exact = true;
        }
    }
    return r;
}

Response OpenAiChatClient::send(const Request& request) {
    std::map<std::string, std::string> headers;
    if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;
    auto http = transport_->post_json("/chat/completions", request_json(request), headers);
    return parse_response(request, http);
}

// --- mock ---------------------------------------------------------------------

MockChatModel::MockChatModel(Responder responder, std::string fail_marker)
    : responder_(std::move(responder)), fail_marker_(std::move(fail_marker)) {}

std::string MockChatModel::default_response(const Request& request) {
    const auto& body = request.body;
    // The test input is the last code section.
    static const std::string kInput = "Input ";
    auto start = body.rfind(kInput);
    if (start == std::string::npos) {
        // No code section: a meta query (prompt synthesis / rewriting).
        return "1. Summarize what this binary function does in one sentence.\n"
               "2. Describe the purpose of the following function concisely.\n"
               "3. Explain the behaviour of this function briefly.\n"
               "4. You are a reverse engineer; state what this function computes.\n"
               "5. Give a short, accurate summary of the function's role.";
    }
    auto code_start = body.find('\n', start);
    code_start = code_start == std::string::npos ? body.size() : code_start + 1;
    auto code = std::string_view(body).substr(code_start);
    if (auto tail = code.rfind("\nFunction Summary:"); tail != std::string_view::npos) code = code.substr(0, tail);
    bool explanation = body.find(kCotTrigger) != std::string::npos;

    std::vector<std::string> words;
    std::set<std::string> seen;
    std::string cur;
    auto flush = [&] {
        if (cur.size() > 1 && !std::isdigit(static_cast<unsigned char>(cur[0])) && seen.insert(cur).second)
            words.push_back(cur);
        cur.clear();
    };
    for (char c : code) {
        if (std::isalnum(static_cast<unsigned char>(c))) cur.push_back(static_cast<char>(std::tolower(c)));
        else flush();
    }
    flush();

    std::size_t limit = 8;
    if (auto pos = request.instruction.rfind(" words"); pos != std::string::npos) {
        auto num_end = pos;
        auto num_start = num_end;
        while (num_start > 0 && std::isdigit(static_cast<unsigned char>(request.instruction[num_start - 1])))
            --num_start;
        if (num_start < num_end) limit = std::stoul(request.instruction.substr(num_start, num_end - num_start));
    }
    if (explanation) {
        std::string out = "Step 1: the function reads";
        for (std::size_t i = 0; i < std::min<std::size_t>(words.size(), 4); ++i) out += " " + words[i];
        return out + ". Step 2: it returns a result.";
    }
    std::string out = "function";
    for (std::size_t i = 0; i + 1 < limit; ++i) out += " " + (i < words.size() ? words[i] : std::string("code"));
    return out;
}

Response MockChatModel::send(const Request& request) {
    ++calls_;
    if (!fail_marker_.empty() && request.body.find(fail_marker_) != std::string::npos)
        throw RequestRejectedError("mock model refused the input (failure marker present)");
    Response r;
    r.text = responder_ ? responder_(request) : default_response(request);
    r.usage.input_tokens = count_tokens(request.body);
    r.usage.output_tokens = count_tokens(r.text);
    return r;
}

// --- caches -------------------------------------------------------------------

namespace {

json to_json(const Response& r) {
    return json{{"text", r.text},
                {"usage", {{"input_tokens", r.usage.input_tokens},
                           {"output_tokens", r.usage.output_tokens},
                           {"exact", r.usage.exact}}}};
}

bool valid_key(const std::string& key) {
    return !key.empty() && key.size() <= 128 &&
           std::all_of(key.begin(), key.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

FileResponseCache::FileResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError(fmt::format("cannot create cache directory '{}': {}", dir_.string(), ec.message()));
}

std::optional<Response> FileResponseCache::get(const std::string& key) {
    if (!valid_key(key)) return std::nullopt;
    auto path = dir_ / (key + ".json");
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
        auto j = json::parse(read_file(path));
        Response r;
        r.text = j.at("text").get<std::string>();
        r.usage.input_tokens = j.at("usage").at("input_tokens").get<std::size_t>();
        r.usage.output_tokens = j.at("usage").at("output_tokens").get<std::size_t>();
        r.usage.exact = j.at("usage").at("exact").get<bool>();
        r.from_cache = true;
        return r;
    } catch (const json::exception&) {
        return std::nullopt;  // unreadable entry behaves as a miss and is overwritten
    } catch (const IoError&) {
        return std::nullopt;
    }
}

void FileResponseCache::put(const std::string& key, const Response& response) {
    if (!valid_key(key)) throw ValidationError(fmt::format("invalid cache key '{}'", key));
    write_file_atomic(dir_ / (key + ".json"), to_json(response).dump(2) + "\n");
}

std::optional<Response> MemoryResponseCache::get(const std::string& key) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    auto r = it->second;
    r.from_cache = true;
    return r;
}

void MemoryResponseCache::put(const std::string& key, const Response& response) {
    std::lock_guard lock(mu_);
    entries_[key] = response;
}

std::size_t MemoryResponseCache::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

// --- gateway --------------------------------------------------------------------

namespace {

std::size_t checked_bound(std::size_t n) {
    if (n < 1 || n > 1024) throw ConfigError(fmt::format("max in-flight must be in [1, 1024], got {}", n));
    return n;
}

}  // namespace

Gateway::Gateway(std::shared_ptr<ChatClient> client, std::shared_ptr<ResponseCache> cache, GatewayOptions options)
    : client_(std::move(client)),
      cache_(std::move(cache)),
      options_(std::move(options)),
      slots_(static_cast<std::ptrdiff_t>(checked_bound(options_.max_in_flight))) {
    if (!client_) throw ConfigError("gateway needs a chat client");
    if (options_.max_retries < 0) throw ConfigError("max retries must be >= 0");
    if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::milliseconds Gateway::backoff_for(int retry, std::optional<double> retry_after) const {
    auto base = options_.base_backoff.count();
    long long exp = base;
    for (int i = 0; i < retry && exp < options_.max_backoff.count(); ++i) exp *= 2;
    if (retry_after) exp = std::max<long long>(exp, static_cast<long long>(std::ceil(*retry_after * 1000.0)));
    return std::chrono::milliseconds(std::min<long long>(exp, options_.max_backoff.count()));
}

Response Gateway::complete(const Request& request) {
    ++requests_;
    auto key = request.cache_key.empty() ? compute_cache_key(request) : request.cache_key;
    if (cache_) {
        if (auto hit = cache_->get(key)) {
            ++hits_;
            return *hit;
        }
    }
    for (int attempt = 0;; ++attempt) {
        std::optional<double> retry_after;
        std::string last_error;
        try {
            slots_.acquire();
            struct Release {
                std::counting_semaphore<1024>& s;
                ~Release() { s.release(); }
            } release{slots_};
            ++calls_;
            auto response = client_->send(request);
            response.from_cache = false;
            if (cache_) cache_->put(key, response);
            return response;
        } catch (const RateLimitedError& e) {
            retry_after = e.retry_after();
            last_error = e.what();
        } catch (...) {
            ++failures_;
            throw;
        }
        if (attempt >= options_.max_retries) {
            ++failures_;
            throw RetriesExhaustedError(
                fmt::format("gave up after {} attempts: {}", attempt + 1, last_error));
        }
        ++retries_;
        // Sleep outside the slot so waiting requests don't starve others.
        options_.sleep(backoff_for(attempt, retry_after));
    }
}

GatewayStats Gateway::stats() const {
    return {requests_.load(), hits_.load(), calls_.load(), retries_.load(), failures_.load()};
}

CotResult run_cot(Gateway& gateway, std::string_view prompt, std::string_view code, int word_limit,
                  const CompletionParams& params, std::string_view rep) {
    CotResult out;
    auto first = gateway.complete(assemble_cot_explanation(prompt, code, params, rep));
    out.explanation = first.text;
    auto second = gateway.complete(assemble_cot_summary(prompt, code, out.explanation, word_limit, params, rep));
    out.summary = second.text;
    out.usage.input_tokens = first.usage.input_tokens + second.usage.input_tokens;
    out.usage.output_tokens = first.usage.output_tokens + second.usage.output_tokens;
    out.usage.exact = first.usage.exact && second.usage.exact;
    return out;
}

}  // namespace binsum::llm
