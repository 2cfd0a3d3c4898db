#include "rear/providers.hpp"

#include "rear/errors.hpp"
#include "rear/text.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace rear {

double l2_norm(const EmbeddingVector& v) {
    double sum = 0.0;
    for (float c : v.components) {
        sum += static_cast<double>(c) * static_cast<double>(c);
    }
    return std::sqrt(sum);
}

void normalize(EmbeddingVector& v) {
    double norm = 0.0;
    for (float c : v.components) {
        if (!std::isfinite(c)) {
            throw std::domain_error("non-finite embedding component");
        }
        norm += static_cast<double>(c) * static_cast<double>(c);
    }
    norm = std::sqrt(norm);
    if (norm == 0.0 || !std::isfinite(norm)) {
        throw std::domain_error("cannot normalize a zero vector");
    }
    for (float& c : v.components) {
        c = static_cast<float>(static_cast<double>(c) / norm);
    }
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "cosine of " + std::to_string(a.dim()) + "-dim and " +
                        std::to_string(b.dim()) + "-dim vectors");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        dot += static_cast<double>(a.components[i]) * static_cast<double>(b.components[i]);
    }
    return dot;
}

CounterSnapshot CounterSnapshot::operator-(const CounterSnapshot& other) const {
    return {embed_calls - other.embed_calls, embed_texts - other.embed_texts,
            pair_calls - other.pair_calls, pair_items - other.pair_items};
}

CounterSnapshot CounterSnapshot::operator+(const CounterSnapshot& other) const {
    return {embed_calls + other.embed_calls, embed_texts + other.embed_texts,
            pair_calls + other.pair_calls, pair_items + other.pair_items};
}

void CallCounters::add_embed(std::uint64_t calls, std::uint64_t texts) {
    embed_calls_.fetch_add(calls, std::memory_order_relaxed);
    embed_texts_.fetch_add(texts, std::memory_order_relaxed);
}

void CallCounters::add_pair(std::uint64_t calls, std::uint64_t items) {
    pair_calls_.fetch_add(calls, std::memory_order_relaxed);
    pair_items_.fetch_add(items, std::memory_order_relaxed);
}

CounterSnapshot CallCounters::snapshot() const {
    return {embed_calls_.load(std::memory_order_relaxed),
            embed_texts_.load(std::memory_order_relaxed),
            pair_calls_.load(std::memory_order_relaxed),
            pair_items_.load(std::memory_order_relaxed)};
}

std::vector<EmbeddingVector> EmbeddingProvider::embed_batch(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw std::invalid_argument("embed_batch requires a non-empty batch");
    }
    for (const auto& text : texts) {
        if (trim(text).empty()) {
            throw std::invalid_argument("embed_batch text is empty after trimming");
        }
    }

    const std::size_t chunk = max_batch() == 0 ? texts.size() : max_batch();
    std::vector<EmbeddingVector> result;
    result.reserve(texts.size());
    for (std::size_t begin = 0; begin < texts.size(); begin += chunk) {
        const std::size_t end = std::min(texts.size(), begin + chunk);
        std::vector<std::string> slice(texts.begin() + begin, texts.begin() + end);
        auto vectors = embed_impl(slice);
        counters_.add_embed(1, slice.size());
        if (vectors.size() != slice.size()) {
            throw Error(ErrorCode::ProviderUnavailable,
                        id() + " returned " + std::to_string(vectors.size()) +
                            " vectors for " + std::to_string(slice.size()) + " texts");
        }
        for (auto& v : vectors) {
            result.push_back(std::move(v));
        }
    }

    const std::size_t dim = result.front().dim();
    for (auto& v : result) {
        if (v.dim() != dim) {
            throw Error(ErrorCode::DimensionMismatch,
                        id() + " returned vectors of dim " + std::to_string(dim) + " and " +
                            std::to_string(v.dim()));
        }
        try {
            normalize(v);
        } catch (const std::domain_error& e) {
            throw Error(ErrorCode::ProviderUnavailable, id() + ": " + e.what());
        }
    }
    return result;
}

std::vector<PairScore> PairScorer::score_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (pairs.empty()) {
        throw std::invalid_argument("score_pairs requires a non-empty batch");
    }
    const std::size_t chunk = max_batch() == 0 ? pairs.size() : max_batch();
    std::vector<PairScore> result;
    result.reserve(pairs.size());
    for (std::size_t begin = 0; begin < pairs.size(); begin += chunk) {
        const std::size_t end = std::min(pairs.size(), begin + chunk);
        std::vector<std::pair<std::string, std::string>> slice(pairs.begin() + begin,
                                                               pairs.begin() + end);
        auto raw = score_impl(slice);
        counters_.add_pair(1, slice.size());
        if (raw.size() != slice.size()) {
            throw Error(ErrorCode::ProviderUnavailable,
                        id() + " returned " + std::to_string(raw.size()) + " scores for " +
                            std::to_string(slice.size()) + " pairs");
        }
        for (double value : raw) {
            if (!std::isfinite(value)) {
                throw Error(ErrorCode::ProviderUnavailable, id() + " returned a non-finite score");
            }
            if (!unit_range()) {
                value = squash_to_unit(value);
            }
            result.push_back({std::clamp(value, 0.0, 1.0)});
        }
    }
    return result;
}

double squash_to_unit(double raw) {
    return 1.0 / (1.0 + std::exp(-raw));
}

EmbeddingVector mock_hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
    if (dim < 2) {
        throw std::invalid_argument("mock_hash_embed requires dim >= 2");
    }
    constexpr int kProbesPerToken = 4;

    EmbeddingVector v;
    v.components.assign(dim, 0.0f);

    auto tokens = tokenize(text);
    if (tokens.empty()) {
        // Token-free text still embeds deterministically from its raw bytes.
        tokens.push_back(std::string(text));
    }
    for (const auto& token : tokens) {
        std::uint64_t state = stable_hash64(token, seed);
        for (int probe = 0; probe < kProbesPerToken; ++probe) {
            const std::uint64_t bits = splitmix64(state);
            const std::size_t index = static_cast<std::size_t>(bits % dim);
            const float sign = (bits >> 63) ? -1.0f : 1.0f;
            v.components[index] += sign;
        }
    }
    if (l2_norm(v) == 0.0) {
        // All probe contributions cancelled; pin a deterministic coordinate.
        v.components[stable_hash64(text, seed) % dim] = 1.0f;
    }
    normalize(v);
    return v;
}

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ < 2) {
        throw std::invalid_argument("HashEmbedder requires dim >= 2");
    }
}

std::string HashEmbedder::id() const {
    return "hash-embedder/dim=" + std::to_string(dim_) + "/seed=" + std::to_string(seed_);
}

std::vector<EmbeddingVector> HashEmbedder::embed_impl(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        out.push_back(mock_hash_embed(text, dim_, seed_));
    }
    return out;
}

std::vector<double> LexicalOverlapScorer::score_impl(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        auto ta = tokenize(a);
        auto tb = tokenize(b);
        std::set<std::string> sa(ta.begin(), ta.end());
        std::set<std::string> sb(tb.begin(), tb.end());
        if (sa.empty() && sb.empty()) {
            out.push_back(a == b ? 1.0 : 0.0);
            continue;
        }
        std::size_t shared = 0;
        for (const auto& token : sa) {
            shared += sb.count(token);
        }
        const std::size_t unioned = sa.size() + sb.size() - shared;
        out.push_back(unioned == 0 ? 0.0
                                   : static_cast<double>(shared) / static_cast<double>(unioned));
    }
    return out;
}

void TablePairScorer::set(const std::string& a, const std::string& b, double score) {
    scores_[{a, b}] = score;
}

std::vector<double> TablePairScorer::score_impl(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) {
        auto it = scores_.find(pair);
        if (it == scores_.end()) {
            it = scores_.find({pair.second, pair.first});
        }
        out.push_back(it == scores_.end() ? default_score_ : it->second);
    }
    return out;
}

} // namespace rear
