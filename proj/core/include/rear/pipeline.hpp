#pragma once

#include "rear/corpus.hpp"
#include "rear/join.hpp"
#include "rear/providers.hpp"
#include "rear/retrieval.hpp"

#include <cstddef>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rear {

/// How the expanded candidate set is cut back down to k_final.
enum class PruneStrategy { refine, alpha_beta, adaptive, max1, max2, none };

PruneStrategy parse_prune_strategy(const std::string& name);
const char* to_string(PruneStrategy strategy);

struct PipelineConfig {
    std::size_t k_base = 5;  // stage-1 pool
    std::size_t k_join = 3;  // reranked join candidates kept
    std::size_t k_final = 5; // tables returned
    double tau = 0.7;        // column joinability threshold
    double alpha_hybrid = 0.5;
    RetrievalMode mode = RetrievalMode::sparse;
    SparseScoring sparse_scoring = SparseScoring::bm25;
    PruneStrategy strategy = PruneStrategy::refine;
    double ab_alpha = 0.6;
    double ab_beta = 0.4;
    std::size_t ann_neighbors = 10; // probes per base column during expansion
    std::size_t row_limit = kDefaultRowLimit;
    std::size_t value_limit = kDefaultValueLimit;
    std::size_t max_pair_columns = 30; // cap per side in table pair scoring

    /// Throws ConfigError; in particular k_final <= k_base + k_join must hold.
    void validate() const;
};

/// Table-pair scores are query-independent, so one cache serves a whole eval
/// run across threads. Keys are unordered: (a,b) and (b,a) share a slot, and
/// concurrent writers agree on the value.
class PairScoreCache {
public:
    std::optional<double> get(const std::string& a, const std::string& b) const;
    void put(const std::string& a, const std::string& b, double value);
    /// Compute-once: concurrent callers for the same pair block on the first
    /// computation instead of racing it, which keeps provider call counts
    /// deterministic under any parallelism.
    double get_or_compute(const std::string& a, const std::string& b,
                          const std::function<double()>& compute);
    std::size_t size() const;

private:
    static std::string key(const std::string& a, const std::string& b);
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::shared_future<double>> values_;
};

enum class CandidateSource { base, joined };

struct CandidateEntry {
    std::string table_id;
    CandidateSource source = CandidateSource::base;
};

/// The expanded pool and every provider score stage 3 consumes.
struct CandidateSet {
    std::vector<CandidateEntry> tables; // base entries first, then joined
    std::map<std::string, double> query_scores;
    std::map<std::pair<std::string, std::string>, double> pair_scores; // unordered keys

    std::vector<std::string> ids() const;        // in tables order
    std::vector<std::string> sorted_ids() const; // ascending
    bool contains(const std::string& table_id) const;
    double query(const std::string& table_id) const;       // throws MissingCandidates
    double pair(const std::string& a, const std::string& b) const; // throws MissingCandidates
};

/// Cross-encoder score between two tables: max over column-text pairs,
/// truncating each side to its first max_pair_columns columns in schema
/// order. Symmetric by construction and cached when a cache is supplied.
double table_pair_score(PairScorer& scorer, const Corpus& corpus, const std::string& table_a,
                        const std::string& table_b, std::size_t max_pair_columns,
                        std::size_t value_limit, PairScoreCache* cache = nullptr);

/// Scores candidates against the query text (one batch) and keeps the top
/// keep entries, ties broken by ascending table_id. keep == 0 short-circuits
/// to an empty list without touching the scorer.
std::vector<ScoredTable> rerank_candidates(PairScorer& scorer, const Corpus& corpus,
                                           const std::string& query_text,
                                           const std::vector<std::string>& candidates,
                                           std::size_t keep, std::size_t row_limit);

/// max_j softmax(s)_j * s_j over a table's neighbor scores. Throws
/// NoNeighbors when the list is empty; a candidate with no peers is the
/// caller's special case (its attention weight is 1).
double attention_score(const std::vector<double>& neighbor_scores);

/// Fills in any query scores the set is missing and, when with_pairs, the
/// scores of every unordered candidate pair. Batched; already-present values
/// are not refetched.
void ensure_scores(PairScorer& scorer, const Corpus& corpus, const std::string& query_text,
                   CandidateSet& candidates, const PipelineConfig& config,
                   PairScoreCache* cache, bool with_pairs);

/// Pure scoring core: ranks the candidates under the strategy using the
/// scores already present in the set. Fixed-k strategies truncate to
/// k_final; adaptive keeps candidates strictly above the mean score; none
/// ranks by query score alone. Sorted score desc, table_id asc.
std::vector<ScoredTable> apply_strategy(PruneStrategy strategy, const CandidateSet& candidates,
                                        const PipelineConfig& config);

/// S(T_i) = C2(q,T_i) * attention over pair scores with every other member.
/// Fetches whatever scores are missing, then ranks to config.k_final.
RankedList refine(PairScorer& scorer, const std::string& query_text, CandidateSet& expanded,
                  const Corpus& corpus, const PipelineConfig& config,
                  PairScoreCache* cache = nullptr);

/// The alternative pruning formulas (alpha_beta, adaptive, max1, max2) under
/// the same contract as refine. Strategy none is run_rear's short-circuit,
/// not a pruning formula, and is rejected here.
RankedList prune_variant(PruneStrategy strategy, PairScorer& scorer,
                         const std::string& query_text, CandidateSet& expanded,
                         const Corpus& corpus, const PipelineConfig& config,
                         PairScoreCache* cache = nullptr);

struct StageTrace {
    std::string query_id;
    std::string query_text;
    RankedList base;                            // stage 1
    std::vector<JoinCandidate> join_candidates; // stage 2, pre-rerank
    std::vector<ScoredTable> joined;            // stage 2, post-rerank
    CandidateSet expanded;                      // stage 3 input
    RankedList final;                           // stage 3 output
    CounterSnapshot provider_calls;             // delta attributable to this query
};

/// {query_id, base:[ids], join_candidates:[ids], joined:[ids],
///  expanded:[ids], final:[{id, score}], counters:{...}}
std::string trace_to_json(const StageTrace& trace);

/// Full retrieve -> expand -> refine pass for one query. dense/embedder may
/// be null in sparse mode; the pair cache is optional and shared. With
/// k_join=0 and strategy none the pipeline collapses to stage-1 output.
StageTrace run_rear(const QueryRecord& query, const Corpus& corpus, const SparseIndex& sparse,
                    const DenseIndex* dense, const ColumnIndex& columns,
                    EmbeddingProvider* embedder, PairScorer& scorer,
                    const PipelineConfig& config, PairScoreCache* pair_cache = nullptr);

} // namespace rear
