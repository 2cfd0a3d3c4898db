#pragma once

#include "rear/corpus.hpp"
#include "rear/providers.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace rear {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

enum class SparseScoring { bm25, tfidf };

/// Inverted index over tokenized table serializations. Immutable after build.
struct SparseIndex {
    // token -> (table_id, term frequency), sorted by table_id
    std::map<std::string, std::vector<std::pair<std::string, std::uint32_t>>> postings;
    std::map<std::string, std::uint64_t> doc_lengths; // table_id -> token count
    double avgdl = 0.0;
    std::size_t table_count = 0;
    Bm25Params params;
    std::size_t row_limit = kDefaultRowLimit;
};

struct DenseIndex {
    std::map<std::string, EmbeddingVector> vectors; // unit-normalized
    std::size_t dim = 0;
    std::string embedder_id;
    std::size_t row_limit = kDefaultRowLimit;
};

struct ScoredTable {
    std::string table_id;
    double score = 0.0;
};

/// Scores non-increasing; distinct ids; ties broken by ascending table_id.
struct RankedList {
    std::string query_id;
    std::vector<ScoredTable> entries;

    std::vector<std::string> ids() const;
    bool contains(const std::string& table_id) const;
};

enum class RetrievalMode { sparse, dense, hybrid };

RetrievalMode parse_retrieval_mode(const std::string& name);
const char* to_string(RetrievalMode mode);
SparseScoring parse_sparse_scoring(const std::string& name);
const char* to_string(SparseScoring scoring);

SparseIndex build_sparse_index(const Corpus& corpus, std::size_t row_limit,
                               Bm25Params params = {});
DenseIndex build_dense_index(const Corpus& corpus, EmbeddingProvider& embedder,
                             std::size_t row_limit);

std::pair<SparseIndex, DenseIndex> build_indexes(const Corpus& corpus,
                                                 EmbeddingProvider& embedder,
                                                 std::size_t row_limit = kDefaultRowLimit);

/// Sum over query token occurrences of
///   IDF(w) * f*(k1+1) / (f + k1*(1 - b + b*|t|/avgdl))
/// with Robertson IDF ln((N-df+0.5)/(df+0.5) + 1) floored at 0.
double bm25_score(const SparseIndex& index, const std::string& query,
                  const std::string& table_id);

/// Term-overlap alternative: sum over query token occurrences of
/// (f/|t|) * (ln((1+N)/(1+df)) + 1).
double tfidf_score(const SparseIndex& index, const std::string& query,
                   const std::string& table_id);

/// Top-k under the mode's score. Hybrid fuses per-query min-max normalized
/// family scores: alpha*norm(sparse) + (1-alpha)*norm(dense). Zero-score
/// tables fill the tail so the list is short only when the corpus is.
RankedList search(RetrievalMode mode, const SparseIndex& sparse, const DenseIndex* dense,
                  EmbeddingProvider* embedder, const std::string& query, std::size_t k,
                  double alpha = 0.5, SparseScoring scoring = SparseScoring::bm25);

/// Versioned dumps; loading and re-saving reproduces the file byte for byte.
std::string sparse_index_to_string(const SparseIndex& index);
SparseIndex sparse_index_from_string(const std::string& text);
std::string dense_index_to_string(const DenseIndex& index);
DenseIndex dense_index_from_string(const std::string& text);

void save_sparse_index(const SparseIndex& index, const std::filesystem::path& path);
SparseIndex load_sparse_index(const std::filesystem::path& path);
void save_dense_index(const DenseIndex& index, const std::filesystem::path& path);
DenseIndex load_dense_index(const std::filesystem::path& path);

/// Stable (score desc, table_id asc) ordering applied everywhere a ranking is
/// materialized.
void sort_ranked(std::vector<ScoredTable>& entries);

} // namespace rear
