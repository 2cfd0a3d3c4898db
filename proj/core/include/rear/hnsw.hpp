#pragma once

#include "rear/providers.hpp"

#include <cstdint>
#include <vector>

namespace rear {

struct HnswParams {
    std::size_t M = 16;
    std::size_t ef_construction = 200;
    std::size_t ef_search = 64;
    std::uint64_t seed = 42;
};

struct HnswHit {
    std::uint32_t id = 0;
    double sim = 0.0; // cosine
};

/// Small-world graph over unit vectors with cosine similarity. Fully
/// deterministic: levels come from a seeded generator keyed on insertion
/// order, and every comparison breaks ties by ascending id, so two indexes
/// built from the same sequence answer queries identically.
class HnswIndex {
public:
    explicit HnswIndex(HnswParams params = {});

    /// Ids are append-only: the n-th call must pass id == n.
    void add(std::uint32_t id, const EmbeddingVector& vec);

    /// Top-k by similarity (desc, id asc). Scans with ef = max(ef_search, k).
    std::vector<HnswHit> search(const EmbeddingVector& query, std::size_t k) const;

    std::size_t size() const { return nodes_.size(); }
    const HnswParams& params() const { return params_; }
    const EmbeddingVector& vector_of(std::uint32_t id) const;

private:
    struct Node {
        EmbeddingVector vec;
        int level = 0;
        std::vector<std::vector<std::uint32_t>> neighbors; // per level
    };

    std::vector<HnswHit> search_layer(const EmbeddingVector& query,
                                      const std::vector<std::uint32_t>& entry_points,
                                      std::size_t ef, int level) const;
    std::vector<std::uint32_t> select_neighbors(const std::vector<HnswHit>& candidates,
                                                std::size_t m) const;
    int draw_level();
    std::size_t max_degree(int level) const;

    HnswParams params_;
    double level_scale_;
    std::uint64_t rng_state_;
    std::vector<Node> nodes_;
    std::uint32_t entry_point_ = 0;
    int max_level_ = -1;
};

} // namespace rear
