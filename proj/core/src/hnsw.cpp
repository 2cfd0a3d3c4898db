#include "rear/hnsw.hpp"

#include "rear/text.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <stdexcept>

namespace rear {
namespace {

// Best-first: higher similarity wins, lower id breaks ties.
struct Better {
    bool operator()(const HnswHit& a, const HnswHit& b) const {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.id < b.id;
    }
};

// priority_queue comparator: "a sorts after b" so the best hit surfaces first.
struct Worse {
    bool operator()(const HnswHit& a, const HnswHit& b) const { return Better{}(b, a); }
};

} // namespace

HnswIndex::HnswIndex(HnswParams params) : params_(params), rng_state_(params.seed) {
    if (params_.M < 2) params_.M = 2;
    level_scale_ = 1.0 / std::log(static_cast<double>(params_.M));
}

const EmbeddingVector& HnswIndex::vector_of(std::uint32_t id) const {
    return nodes_.at(id).vec;
}

int HnswIndex::draw_level() {
    const std::uint64_t bits = splitmix64(rng_state_);
    // (0, 1]: the +1 keeps log's argument strictly positive.
    const double u = static_cast<double>((bits >> 11) + 1) / 9007199254740992.0;
    return static_cast<int>(std::floor(-std::log(u) * level_scale_));
}

std::size_t HnswIndex::max_degree(int level) const {
    return level == 0 ? params_.M * 2 : params_.M;
}

std::vector<HnswHit> HnswIndex::search_layer(const EmbeddingVector& query,
                                             const std::vector<std::uint32_t>& entry_points,
                                             std::size_t ef, int level) const {
    std::vector<char> visited(nodes_.size(), 0);
    std::priority_queue<HnswHit, std::vector<HnswHit>, Worse> frontier;
    std::set<HnswHit, Better> best; // size capped at ef; worst at rbegin
    for (std::uint32_t ep : entry_points) {
        if (visited[ep]) continue;
        visited[ep] = 1;
        HnswHit hit{ep, cosine(query, nodes_[ep].vec)};
        frontier.push(hit);
        best.insert(hit);
    }
    while (best.size() > ef) best.erase(std::prev(best.end()));
    while (!frontier.empty()) {
        HnswHit current = frontier.top();
        frontier.pop();
        if (best.size() == ef && Better{}(*std::prev(best.end()), current)) break;
        for (std::uint32_t next : nodes_[current.id].neighbors[level]) {
            if (visited[next]) continue;
            visited[next] = 1;
            HnswHit hit{next, cosine(query, nodes_[next].vec)};
            if (best.size() < ef || Better{}(hit, *std::prev(best.end()))) {
                frontier.push(hit);
                best.insert(hit);
                if (best.size() > ef) best.erase(std::prev(best.end()));
            }
        }
    }
    return {best.begin(), best.end()};
}

std::vector<std::uint32_t> HnswIndex::select_neighbors(const std::vector<HnswHit>& candidates,
                                                       std::size_t m) const {
    // Diversity heuristic: keep a candidate only if it is closer to the base
    // than to anything already kept, then backfill with the nearest rejects.
    std::vector<std::uint32_t> kept;
    std::vector<std::uint32_t> rejected;
    for (const auto& candidate : candidates) {
        if (kept.size() >= m) break;
        bool shadowed = false;
        for (std::uint32_t r : kept) {
            if (cosine(nodes_[candidate.id].vec, nodes_[r].vec) > candidate.sim) {
                shadowed = true;
                break;
            }
        }
        if (shadowed) {
            rejected.push_back(candidate.id);
        } else {
            kept.push_back(candidate.id);
        }
    }
    for (std::uint32_t r : rejected) {
        if (kept.size() >= m) break;
        kept.push_back(r);
    }
    return kept;
}

void HnswIndex::add(std::uint32_t id, const EmbeddingVector& vec) {
    if (id != nodes_.size()) {
        throw std::invalid_argument("hnsw ids must be appended in order");
    }
    Node node;
    node.vec = vec;
    node.level = draw_level();
    node.neighbors.assign(static_cast<std::size_t>(node.level) + 1, {});
    nodes_.push_back(std::move(node));
    if (nodes_.size() == 1) {
        entry_point_ = id;
        max_level_ = nodes_[id].level;
        return;
    }

    const int new_level = nodes_[id].level;
    std::vector<std::uint32_t> eps{entry_point_};
    for (int level = max_level_; level > new_level; --level) {
        eps = {search_layer(vec, eps, 1, level).front().id};
    }
    for (int level = std::min(new_level, max_level_); level >= 0; --level) {
        auto found = search_layer(vec, eps, params_.ef_construction, level);
        auto chosen = select_neighbors(found, params_.M);
        nodes_[id].neighbors[level] = chosen;
        for (std::uint32_t peer : chosen) {
            auto& links = nodes_[peer].neighbors[level];
            links.push_back(id);
            if (links.size() > max_degree(level)) {
                std::vector<HnswHit> pool;
                pool.reserve(links.size());
                for (std::uint32_t candidate : links) {
                    pool.push_back(
                        {candidate, cosine(nodes_[peer].vec, nodes_[candidate].vec)});
                }
                std::sort(pool.begin(), pool.end(), Better{});
                links = select_neighbors(pool, max_degree(level));
            }
        }
        eps.clear();
        for (const auto& hit : found) eps.push_back(hit.id);
    }
    if (new_level > max_level_) {
        max_level_ = new_level;
        entry_point_ = id;
    }
}

std::vector<HnswHit> HnswIndex::search(const EmbeddingVector& query, std::size_t k) const {
    if (nodes_.empty() || k == 0) return {};
    std::vector<std::uint32_t> eps{entry_point_};
    for (int level = max_level_; level > 0; --level) {
        eps = {search_layer(query, eps, 1, level).front().id};
    }
    auto hits = search_layer(query, eps, std::max(params_.ef_search, k), 0);
    if (hits.size() > k) hits.resize(k);
    return hits;
}

} // namespace rear
