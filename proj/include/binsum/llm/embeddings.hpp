#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "binsum/llm/gateway.hpp"
#include "binsum/metrics/metrics.hpp"

namespace binsum::llm {

// Embeddings service (`POST <base>/embeddings`, `{"model", "input": [...]}`).
// pooled() sends the whole summary and uses the service's own pooling and
// tokenization; results are memoized per text.
class RemoteEmbeddingProvider final : public metrics::EmbeddingProvider {
public:
    RemoteEmbeddingProvider(std::shared_ptr<Transport> transport, std::string api_key, std::string model,
                            std::size_t dim = 0);

    [[nodiscard]] std::string name() const override { return "remote:" + model_; }
    // Configured dimension, or the one seen in the first response (0 before).
    [[nodiscard]] std::size_t dim() const override;
    [[nodiscard]] std::vector<std::vector<double>> embed_tokens(const metrics::Tokens& tokens) const override;
    [[nodiscard]] std::vector<double> pooled(std::string_view text) const override;
    [[nodiscard]] std::string tokenization() const override { return "service"; }

private:
    std::vector<std::vector<double>> request(const std::vector<std::string>& inputs) const;

    std::shared_ptr<Transport> transport_;
    std::string api_key_;
    std::string model_;
    mutable std::mutex mu_;
    mutable std::size_t dim_;
    mutable std::map<std::string, std::vector<double>> memo_;
};

}  // namespace binsum::llm
