#include "binsum/llm/embeddings.hpp"

#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace binsum::llm {

using nlohmann::json;

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::shared_ptr<Transport> transport, std::string api_key,
                                                 std::string model, std::size_t dim)
    : transport_(std::move(transport)), api_key_(std::move(api_key)), model_(std::move(model)), dim_(dim) {
    if (model_.empty()) throw ConfigError("embedding model name is empty");
}

std::size_t RemoteEmbeddingProvider::dim() const {
    std::lock_guard lock(mu_);
    return dim_;
}

std::vector<std::vector<double>> RemoteEmbeddingProvider::request(const std::vector<std::string>& inputs) const {
    json body{{"model", model_}, {"input", inputs}};
    std::map<std::string, std::string> headers;
    if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;
    auto http = transport_->post_json("/embeddings", body.dump(), headers);
    if (http.status == 401 || http.status == 403) throw AuthError(fmt::format("embeddings: HTTP {}", http.status));
    if (http.status < 200 || http.status >= 300)
        throw RequestRejectedError(fmt::format("embeddings: HTTP {}", http.status));

    std::vector<std::vector<double>> out(inputs.size());
    try {
        auto j = json::parse(http.body);
        const auto& data = j.at("data");
        if (!data.is_array() || data.size() != inputs.size())
            throw MalformedResponseError("embeddings: wrong number of vectors");
        for (std::size_t i = 0; i < data.size(); ++i) {
            auto idx = data[i].contains("index") ? data[i].at("index").get<std::size_t>() : i;
            if (idx >= out.size()) throw MalformedResponseError("embeddings: index out of range");
            out[idx] = data[i].at("embedding").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw MalformedResponseError(fmt::format("embeddings: {}", e.what()));
    }
    std::lock_guard lock(mu_);
    for (const auto& v : out) {
        if (v.empty()) throw MalformedResponseError("embeddings: empty vector");
        for (double x : v)
            if (!std::isfinite(x)) throw MalformedResponseError("embeddings: non-finite component");
        if (dim_ == 0) dim_ = v.size();
        if (v.size() != dim_)
            throw MalformedResponseError(fmt::format("embeddings: expected dimension {}, got {}", dim_, v.size()));
    }
    return out;
}

std::vector<std::vector<double>> RemoteEmbeddingProvider::embed_tokens(const metrics::Tokens& tokens) const {
    if (tokens.empty()) return {};
    return request(tokens);
}

std::vector<double> RemoteEmbeddingProvider::pooled(std::string_view text) const {
    if (metrics::tokenize(text).empty()) throw metrics::EmptySummaryError("summary has no tokens");
    std::string key(text);
    {
        std::lock_guard lock(mu_);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    auto v = request({key}).front();
    std::lock_guard lock(mu_);
    memo_.emplace(key, v);
    return v;
}

}  // namespace binsum::llm
