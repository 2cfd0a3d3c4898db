#pragma once

#include "rear/providers.hpp"

#include <filesystem>
#include <mutex>
#include <unordered_map>

namespace rear {

/// Disk-backed embedding cache keyed by (provider id, exact text). Wraps an
/// inner provider; misses are forwarded in one batch and appended to the cache
/// file, so counters (taken from the inner provider) reflect real calls only.
class CachedEmbedder final : public EmbeddingProvider {
public:
    CachedEmbedder(EmbeddingProvider& inner, std::filesystem::path cache_file);

    std::string id() const override { return inner_.id(); }
    const CallCounters& counters() const override { return inner_.counters(); }

    /// Serves hits from the cache; only misses reach the inner provider (and
    /// its counters).
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

    std::size_t entries() const;

protected:
    std::vector<EmbeddingVector> embed_impl(const std::vector<std::string>& texts) override;

private:
    void load();
    void append(const std::vector<std::string>& texts,
                const std::vector<EmbeddingVector>& vectors);

    EmbeddingProvider& inner_;
    std::filesystem::path cache_file_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> cache_;
};

} // namespace rear
