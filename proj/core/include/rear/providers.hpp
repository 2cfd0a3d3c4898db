#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rear {

struct EmbeddingVector {
    std::vector<float> components;

    std::size_t dim() const { return components.size(); }
};

double l2_norm(const EmbeddingVector& v);

/// Scales to unit L2 norm (accumulation in double). Throws std::domain_error
/// on a zero or non-finite vector.
void normalize(EmbeddingVector& v);

/// Cosine similarity of two unit vectors; exact argument symmetry.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct PairScore {
    double value = 0.0; // always in [0, 1]
};

struct CounterSnapshot {
    std::uint64_t embed_calls = 0;
    std::uint64_t embed_texts = 0;
    std::uint64_t pair_calls = 0;
    std::uint64_t pair_items = 0;

    CounterSnapshot operator-(const CounterSnapshot& other) const;
    CounterSnapshot operator+(const CounterSnapshot& other) const;
    bool operator==(const CounterSnapshot& other) const = default;
};

/// Monotone within a run; safe to bump from multiple threads.
class CallCounters {
public:
    void add_embed(std::uint64_t calls, std::uint64_t texts);
    void add_pair(std::uint64_t calls, std::uint64_t items);
    CounterSnapshot snapshot() const;

private:
    std::atomic<std::uint64_t> embed_calls_{0};
    std::atomic<std::uint64_t> embed_texts_{0};
    std::atomic<std::uint64_t> pair_calls_{0};
    std::atomic<std::uint64_t> pair_items_{0};
};

/// Text-embedding backend (bi-encoder). embed_batch validates inputs, chunks
/// requests, counts issued batches, and unit-normalizes the results.
/// Implementations must be callable from multiple threads.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::string id() const = 0;

    /// One unit vector per text, in input order, all of identical dimension.
    /// Throws Error(ProviderUnavailable) or Error(DimensionMismatch).
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);

    virtual const CallCounters& counters() const { return counters_; }

protected:
    virtual std::vector<EmbeddingVector> embed_impl(const std::vector<std::string>& texts) = 0;

    /// Maximum texts per issued request; 0 means unlimited.
    virtual std::size_t max_batch() const { return 0; }

    CallCounters counters_;
};

/// Pair-scoring backend (cross-encoder shape). Raw scores from providers that
/// declare unbounded outputs pass through the logistic squashing; providers
/// declaring [0,1] outputs are clamped against floating-point spill only.
class PairScorer {
public:
    virtual ~PairScorer() = default;

    virtual std::string id() const = 0;

    /// One score per pair, in input order, each in [0, 1].
    std::vector<PairScore> score_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

    virtual const CallCounters& counters() const { return counters_; }

protected:
    virtual std::vector<double> score_impl(const std::vector<std::pair<std::string, std::string>>& pairs) = 0;

    /// True when the backend declares raw outputs already in [0, 1].
    virtual bool unit_range() const = 0;

    virtual std::size_t max_batch() const { return 0; }

    CallCounters counters_;
};

/// Logistic map to (0, 1) for unbounded raw scores.
double squash_to_unit(double raw);

/// Deterministic bag-of-tokens feature-hashing embedder. Each token spreads
/// over a few signed coordinates derived from stable_hash64(token, seed);
/// texts with equal token bags map to identical vectors.
EmbeddingVector mock_hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed);

class HashEmbedder final : public EmbeddingProvider {
public:
    HashEmbedder(std::size_t dim, std::uint64_t seed);

    std::string id() const override;
    std::size_t dim() const { return dim_; }

protected:
    std::vector<EmbeddingVector> embed_impl(const std::vector<std::string>& texts) override;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Jaccard similarity over token sets. Scores both query-table relevance and
/// column-pair similarity in offline runs; identical inputs score 1.0.
class LexicalOverlapScorer final : public PairScorer {
public:
    std::string id() const override { return "mock-overlap"; }

protected:
    std::vector<double> score_impl(const std::vector<std::pair<std::string, std::string>>& pairs) override;
    bool unit_range() const override { return true; }
};

/// Table-driven scorer for tests: exact (a,b) lookup, then (b,a), then default.
class TablePairScorer final : public PairScorer {
public:
    explicit TablePairScorer(double default_score = 0.0) : default_score_(default_score) {}

    void set(const std::string& a, const std::string& b, double score);

    std::string id() const override { return "mock-table"; }

protected:
    std::vector<double> score_impl(const std::vector<std::pair<std::string, std::string>>& pairs) override;
    bool unit_range() const override { return true; }

private:
    std::map<std::pair<std::string, std::string>, double> scores_;
    double default_score_;
};

} // namespace rear
