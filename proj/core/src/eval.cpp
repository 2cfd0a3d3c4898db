#include "rear/eval.hpp"

#include "rear/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>
#include <thread>

namespace rear {
namespace {

using ordered_json = nlohmann::ordered_json;

} // namespace

QueryMetrics query_metrics(const RankedList& retrieved, const std::vector<std::string>& gold) {
    if (gold.empty()) throw Error(ErrorCode::EmptyGold, "query has no gold tables");
    if (retrieved.entries.empty()) {
        throw Error(ErrorCode::EmptyRetrieved, "query retrieved nothing");
    }
    std::set<std::string> gold_set(gold.begin(), gold.end());
    std::size_t hits = 0;
    for (const auto& entry : retrieved.entries) {
        if (gold_set.count(entry.table_id)) ++hits;
    }
    QueryMetrics metrics;
    metrics.query_id = retrieved.query_id;
    metrics.retrieved_count = retrieved.entries.size();
    metrics.gold_count = gold_set.size();
    metrics.recall = static_cast<double>(hits) / static_cast<double>(gold_set.size());
    metrics.precision = static_cast<double>(hits) / static_cast<double>(retrieved.entries.size());
    metrics.full_recall = hits == gold_set.size() ? 1 : 0;
    return metrics;
}

OracleMode parse_oracle_mode(const std::string& name) {
    if (name == "oracle_retrieval") return OracleMode::retrieval;
    if (name == "oracle_prune") return OracleMode::prune;
    throw Error(ErrorCode::ConfigError, "unknown oracle mode: " + name);
}

RankedList oracle_mode(OracleMode mode, const RankedList* candidates,
                       const std::vector<std::string>& gold) {
    RankedList out;
    if (mode == OracleMode::retrieval) {
        std::set<std::string> gold_set(gold.begin(), gold.end());
        for (const auto& table_id : gold_set) out.entries.push_back({table_id, 1.0});
        return out;
    }
    if (!candidates) {
        throw Error(ErrorCode::MissingCandidates, "oracle_prune needs a candidate list");
    }
    out.query_id = candidates->query_id;
    std::set<std::string> gold_set(gold.begin(), gold.end());
    for (const auto& entry : candidates->entries) {
        if (gold_set.count(entry.table_id)) out.entries.push_back(entry);
    }
    return out;
}

EvalReport aggregate_report(std::vector<QueryMetrics> metrics, CounterSnapshot counters,
                            PipelineConfig config) {
    if (metrics.empty()) throw Error(ErrorCode::NoQueries, "nothing to aggregate");
    std::sort(metrics.begin(), metrics.end(),
              [](const QueryMetrics& a, const QueryMetrics& b) {
                  return a.query_id < b.query_id;
              });
    EvalReport report;
    report.config = config;
    report.counters = counters;
    const double n = static_cast<double>(metrics.size());
    for (const auto& m : metrics) {
        report.mean_recall += m.recall;
        report.mean_precision += m.precision;
        report.mean_full_recall += m.full_recall;
    }
    report.mean_recall /= n;
    report.mean_precision /= n;
    report.mean_full_recall /= n;
    report.per_query = std::move(metrics);
    return report;
}

std::string render_percent(double fraction) {
    const double rounded = std::floor(fraction * 100.0 * 100.0 + 0.5) / 100.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", rounded);
    return buf;
}

std::string report_to_json(const EvalReport& report) {
    ordered_json doc;
    doc["config"] = {{"k_base", report.config.k_base},
                     {"k_join", report.config.k_join},
                     {"k_final", report.config.k_final},
                     {"tau", report.config.tau},
                     {"alpha_hybrid", report.config.alpha_hybrid},
                     {"mode", to_string(report.config.mode)},
                     {"sparse_scoring", to_string(report.config.sparse_scoring)},
                     {"strategy", to_string(report.config.strategy)},
                     {"ab_alpha", report.config.ab_alpha},
                     {"ab_beta", report.config.ab_beta},
                     {"ann_neighbors", report.config.ann_neighbors},
                     {"row_limit", report.config.row_limit},
                     {"value_limit", report.config.value_limit},
                     {"max_pair_columns", report.config.max_pair_columns}};
    doc["aggregates"] = {{"recall", render_percent(report.mean_recall)},
                         {"precision", render_percent(report.mean_precision)},
                         {"full_recall", render_percent(report.mean_full_recall)}};
    doc["counters"] = {{"embed_calls", report.counters.embed_calls},
                       {"embed_texts", report.counters.embed_texts},
                       {"pair_calls", report.counters.pair_calls},
                       {"pair_items", report.counters.pair_items}};
    ordered_json rows = ordered_json::array();
    for (const auto& m : report.per_query) {
        rows.push_back({{"query_id", m.query_id},
                        {"recall", m.recall},
                        {"precision", m.precision},
                        {"full_recall", m.full_recall},
                        {"retrieved_count", m.retrieved_count},
                        {"gold_count", m.gold_count}});
    }
    doc["per_query"] = std::move(rows);
    return doc.dump(2) + "\n";
}

std::string render_row_header() {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-12s %10s %10s %12s %8s", "strategy", "recall",
                  "precision", "full_recall", "queries");
    return buf;
}

std::string render_report_row(const std::string& label, const EvalReport& report) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %10s %10s %12s %8zu", label.c_str(),
                  render_percent(report.mean_recall).c_str(),
                  render_percent(report.mean_precision).c_str(),
                  render_percent(report.mean_full_recall).c_str(), report.per_query.size());
    return buf;
}

EvalReport evaluate_queries(const std::vector<QueryRecord>& queries, const Corpus& corpus,
                            const SparseIndex& sparse, const DenseIndex* dense,
                            const ColumnIndex& columns, EmbeddingProvider* embedder,
                            PairScorer& scorer, const PipelineConfig& config,
                            std::size_t parallelism) {
    if (queries.empty()) throw Error(ErrorCode::NoQueries, "query file is empty");
    config.validate();

    CounterSnapshot before = scorer.counters().snapshot();
    if (embedder) before = before + embedder->counters().snapshot();

    PairScoreCache cache;
    std::vector<QueryMetrics> metrics(queries.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= queries.size()) return;
            try {
                const auto& query = queries[i];
                auto trace = run_rear(query, corpus, sparse, dense, columns, embedder, scorer,
                                      config, &cache);
                if (trace.final.entries.empty()) {
                    // Adaptive pruning can hand back nothing; that scores
                    // zero rather than failing the run.
                    metrics[i] = QueryMetrics{query.query_id, 0.0, 0.0, 0, 0,
                                              query.gold_tables.size()};
                } else {
                    metrics[i] = query_metrics(trace.final, query.gold_tables);
                }
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const std::size_t threads =
        std::max<std::size_t>(1, std::min(parallelism, queries.size()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& thread : pool) thread.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    CounterSnapshot after = scorer.counters().snapshot();
    if (embedder) after = after + embedder->counters().snapshot();
    return aggregate_report(std::move(metrics), after - before, config);
}

} // namespace rear
