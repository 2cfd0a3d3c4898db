#pragma once

#include "rear/providers.hpp"

#include <chrono>
#include <cstddef>
#include <string>

namespace rear {

struct HttpProviderConfig {
    std::string url;   // e.g. http://localhost:8080/embed
    std::string model; // forwarded verbatim in the request body
    std::size_t max_batch = 64;
    int max_attempts = 3;
    std::chrono::milliseconds timeout{30000};
    std::chrono::milliseconds backoff_base{100}; // doubled per retry
};

/// POST {model, texts:[...]} -> {vectors:[[...], ...]}.
class HttpEmbedder final : public EmbeddingProvider {
public:
    explicit HttpEmbedder(HttpProviderConfig config);

    std::string id() const override;

protected:
    std::vector<EmbeddingVector> embed_impl(const std::vector<std::string>& texts) override;
    std::size_t max_batch() const override { return config_.max_batch; }

private:
    HttpProviderConfig config_;
};

/// POST {model, pairs:[[a,b], ...]} -> {scores:[...]}.
/// Raw scores go through the logistic squashing unless the endpoint is
/// declared to emit [0,1] already.
class HttpPairScorer final : public PairScorer {
public:
    HttpPairScorer(HttpProviderConfig config, bool unit_range_scores);

    std::string id() const override;

protected:
    std::vector<double> score_impl(const std::vector<std::pair<std::string, std::string>>& pairs) override;
    bool unit_range() const override { return unit_range_scores_; }
    std::size_t max_batch() const override { return config_.max_batch; }

private:
    HttpProviderConfig config_;
    bool unit_range_scores_;
};

} // namespace rear
