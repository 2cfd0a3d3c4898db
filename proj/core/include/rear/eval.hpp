#pragma once

#include "rear/corpus.hpp"
#include "rear/join.hpp"
#include "rear/pipeline.hpp"
#include "rear/providers.hpp"
#include "rear/retrieval.hpp"

#include <string>
#include <vector>

namespace rear {

struct QueryMetrics {
    std::string query_id;
    double recall = 0.0;
    double precision = 0.0;
    int full_recall = 0; // 1 iff gold is a subset of retrieved
    std::size_t retrieved_count = 0;
    std::size_t gold_count = 0;
};

/// Exact-id set metrics. Throws EmptyGold / EmptyRetrieved.
QueryMetrics query_metrics(const RankedList& retrieved, const std::vector<std::string>& gold);

enum class OracleMode { retrieval, prune };

OracleMode parse_oracle_mode(const std::string& name);

/// retrieval: the gold set itself, ascending, score 1.0 — a perfect stage 1.
/// prune: candidates ∩ gold in candidate order — a perfect stage 3; needs
/// candidates (MissingCandidates otherwise).
RankedList oracle_mode(OracleMode mode, const RankedList* candidates,
                       const std::vector<std::string>& gold);

struct EvalReport {
    std::vector<QueryMetrics> per_query; // ascending query_id
    double mean_recall = 0.0;
    double mean_precision = 0.0;
    double mean_full_recall = 0.0;
    CounterSnapshot counters;
    PipelineConfig config;
};

/// Arithmetic means over the given queries. Throws NoQueries on empty input.
EvalReport aggregate_report(std::vector<QueryMetrics> metrics, CounterSnapshot counters,
                            PipelineConfig config);

/// Fraction -> percent with half-up rounding to two decimals: 2/3 -> "66.67".
std::string render_percent(double fraction);

/// {config, aggregates:{recall, precision, full_recall}, counters,
///  per_query:[...]} — byte-stable for identical inputs.
std::string report_to_json(const EvalReport& report);

std::string render_row_header();
/// One Table-2-shaped line: label, rendered metrics, query count.
std::string render_report_row(const std::string& label, const EvalReport& report);

/// Runs the pipeline over every query, fanning out across min(parallelism,
/// queries) threads. Per-query results land in query_id order no matter the
/// schedule; a query whose final list comes back empty (possible under
/// adaptive pruning) scores zero instead of erroring. Counters report the
/// provider usage of the whole run.
EvalReport evaluate_queries(const std::vector<QueryRecord>& queries, const Corpus& corpus,
                            const SparseIndex& sparse, const DenseIndex* dense,
                            const ColumnIndex& columns, EmbeddingProvider* embedder,
                            PairScorer& scorer, const PipelineConfig& config,
                            std::size_t parallelism = 1);

} // namespace rear
