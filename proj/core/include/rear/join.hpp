#pragma once

#include "rear/corpus.hpp"
#include "rear/hnsw.hpp"
#include "rear/providers.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rear {

/// Below this many columns the index answers neighbor queries by brute force;
/// the graph only pays for itself on larger corpora.
inline constexpr std::size_t kAnnThreshold = 1000;

enum class AnnMode { Auto, ForceAnn, ForceExact };

AnnMode parse_ann_mode(const std::string& name);
const char* to_string(AnnMode mode);

struct ColumnEntry {
    std::string table_id;
    std::string column;
    EmbeddingVector vec;
};

struct ColumnNeighbor {
    std::uint32_t id = 0;
    double sim = 0.0;
};

/// Embeddings for every column in the corpus, in (table order, declared
/// column order). Neighbor queries run on the small-world graph when it is
/// active and by exact scan otherwise; both exclude the probe entry itself
/// and order hits by similarity desc, id asc, so they agree whenever the
/// graph search is exact.
struct ColumnIndex {
    std::vector<ColumnEntry> entries;
    std::map<std::string, std::vector<std::uint32_t>> by_table;
    HnswIndex ann;
    bool uses_ann = false;
    std::string embedder_id;
    std::size_t value_limit = kDefaultValueLimit;

    const ColumnEntry& entry(std::uint32_t id) const { return entries.at(id); }
    const std::vector<std::uint32_t>& table_columns(const std::string& table_id) const;

    /// Top-m other columns for an indexed column.
    std::vector<ColumnNeighbor> neighbors(std::uint32_t id, std::size_t m) const;
    /// Top-m indexed columns for an arbitrary probe vector (no self to skip).
    std::vector<ColumnNeighbor> neighbors(const EmbeddingVector& probe, std::size_t m) const;
};

ColumnIndex build_column_index(const Corpus& corpus, EmbeddingProvider& embedder,
                               std::size_t value_limit = kDefaultValueLimit,
                               AnnMode mode = AnnMode::Auto, HnswParams ann_params = {});

/// Exact max cosine over all column pairs of two distinct tables.
double joinable_pair(const ColumnIndex& index, const std::string& table_a,
                     const std::string& table_b);

struct JoinCandidate {
    std::string table_id;
    std::string base_table;    // strongest edge that pulled the table in
    std::string base_column;
    std::string joined_column;
    double sim = 0.0;
};

/// Tables reachable from any base table through a column pair with
/// similarity >= tau, probing top-m neighbors per base column. Base tables
/// never appear in the result. One candidate per table, carrying its best
/// edge; sorted by sim desc, table_id asc.
std::vector<JoinCandidate> expand_candidates(const ColumnIndex& index,
                                             const std::vector<std::string>& base_tables,
                                             double tau, std::size_t m);

struct JoinEdge {
    std::string table_a;
    std::string column_a;
    std::string table_b;
    std::string column_b;
    double sim = 0.0;
};

/// Every cross-table column pair with similarity >= tau discoverable through
/// top-m neighbor probes, deduplicated and sorted by (table_a, column_a,
/// table_b, column_b). Endpoints are ordered so table_a < table_b.
std::vector<JoinEdge> all_join_edges(const ColumnIndex& index, double tau, std::size_t m);

std::string column_index_to_string(const ColumnIndex& index);
ColumnIndex column_index_from_string(const std::string& text);
void save_column_index(const ColumnIndex& index, const std::filesystem::path& path);
ColumnIndex load_column_index(const std::filesystem::path& path);

} // namespace rear
