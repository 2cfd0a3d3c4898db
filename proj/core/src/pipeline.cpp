#include "rear/pipeline.hpp"

#include "rear/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace rear {
namespace {

using ordered_json = nlohmann::ordered_json;

CounterSnapshot counters_now(EmbeddingProvider* embedder, PairScorer& scorer) {
    CounterSnapshot snapshot = scorer.counters().snapshot();
    if (embedder) snapshot = snapshot + embedder->counters().snapshot();
    return snapshot;
}

std::pair<std::string, std::string> unordered_key(const std::string& a, const std::string& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

} // namespace

PruneStrategy parse_prune_strategy(const std::string& name) {
    if (name == "refine") return PruneStrategy::refine;
    if (name == "alpha_beta") return PruneStrategy::alpha_beta;
    if (name == "adaptive") return PruneStrategy::adaptive;
    if (name == "max1") return PruneStrategy::max1;
    if (name == "max2") return PruneStrategy::max2;
    if (name == "none") return PruneStrategy::none;
    throw Error(ErrorCode::ConfigError, "unknown prune strategy: " + name);
}

const char* to_string(PruneStrategy strategy) {
    switch (strategy) {
    case PruneStrategy::refine: return "refine";
    case PruneStrategy::alpha_beta: return "alpha_beta";
    case PruneStrategy::adaptive: return "adaptive";
    case PruneStrategy::max1: return "max1";
    case PruneStrategy::max2: return "max2";
    case PruneStrategy::none: return "none";
    }
    return "?";
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
    if (k_base == 0) fail("k_base must be positive");
    if (k_final == 0) fail("k_final must be positive");
    if (k_final > k_base + k_join) {
        fail("k_final exceeds the candidate pool (k_base + k_join)");
    }
    if (!(tau >= 0.0 && tau <= 1.0)) fail("tau must lie in [0, 1]");
    if (!(alpha_hybrid >= 0.0 && alpha_hybrid <= 1.0)) fail("alpha_hybrid must lie in [0, 1]");
    if (!(ab_alpha >= 0.0) || !std::isfinite(ab_alpha)) fail("ab_alpha must be >= 0");
    if (!(ab_beta >= 0.0) || !std::isfinite(ab_beta)) fail("ab_beta must be >= 0");
    if (ann_neighbors == 0) fail("ann_neighbors must be positive");
    if (max_pair_columns == 0) fail("max_pair_columns must be positive");
}

std::string PairScoreCache::key(const std::string& a, const std::string& b) {
    const std::string& lo = a < b ? a : b;
    const std::string& hi = a < b ? b : a;
    return std::to_string(lo.size()) + ':' + lo + hi;
}

std::optional<double> PairScoreCache::get(const std::string& a, const std::string& b) const {
    std::shared_future<double> pending;
    {
        std::lock_guard lock(mutex_);
        auto it = values_.find(key(a, b));
        if (it == values_.end()) return std::nullopt;
        pending = it->second;
    }
    return pending.get();
}

void PairScoreCache::put(const std::string& a, const std::string& b, double value) {
    std::promise<double> ready;
    ready.set_value(value);
    std::lock_guard lock(mutex_);
    values_[key(a, b)] = ready.get_future().share();
}

double PairScoreCache::get_or_compute(const std::string& a, const std::string& b,
                                      const std::function<double()>& compute) {
    std::shared_future<double> task;
    bool owner = false;
    std::promise<double> promise;
    {
        std::lock_guard lock(mutex_);
        auto [it, inserted] = values_.try_emplace(key(a, b));
        if (inserted) {
            it->second = promise.get_future().share();
            owner = true;
        }
        task = it->second;
    }
    if (owner) {
        try {
            promise.set_value(compute());
        } catch (...) {
            promise.set_exception(std::current_exception());
            // A failed computation must not poison later retries.
            std::lock_guard lock(mutex_);
            values_.erase(key(a, b));
        }
    }
    return task.get();
}

std::size_t PairScoreCache::size() const {
    std::lock_guard lock(mutex_);
    return values_.size();
}

std::vector<std::string> CandidateSet::ids() const {
    std::vector<std::string> out;
    out.reserve(tables.size());
    for (const auto& entry : tables) out.push_back(entry.table_id);
    return out;
}

std::vector<std::string> CandidateSet::sorted_ids() const {
    auto out = ids();
    std::sort(out.begin(), out.end());
    return out;
}

bool CandidateSet::contains(const std::string& table_id) const {
    return std::any_of(tables.begin(), tables.end(), [&](const CandidateEntry& entry) {
        return entry.table_id == table_id;
    });
}

double CandidateSet::query(const std::string& table_id) const {
    auto it = query_scores.find(table_id);
    if (it == query_scores.end()) {
        throw Error(ErrorCode::MissingCandidates, "no query score for " + table_id);
    }
    return it->second;
}

double CandidateSet::pair(const std::string& a, const std::string& b) const {
    auto it = pair_scores.find(unordered_key(a, b));
    if (it == pair_scores.end()) {
        throw Error(ErrorCode::MissingCandidates, "no pair score for " + a + "/" + b);
    }
    return it->second;
}

double table_pair_score(PairScorer& scorer, const Corpus& corpus, const std::string& table_a,
                        const std::string& table_b, std::size_t max_pair_columns,
                        std::size_t value_limit, PairScoreCache* cache) {
    if (table_a == table_b) throw Error(ErrorCode::SameTable, table_a);
    auto compute = [&]() {
        // Canonical order keeps the score symmetric even for asymmetric
        // scorers.
        const auto [lo, hi] = unordered_key(table_a, table_b);
        const TableRecord& first = corpus.require(lo);
        const TableRecord& second = corpus.require(hi);
        std::vector<std::string> lo_texts;
        std::vector<std::string> hi_texts;
        for (std::size_t i = 0; i < first.columns.size() && i < max_pair_columns; ++i) {
            lo_texts.push_back(serialize_column(first, first.columns[i], value_limit));
        }
        for (std::size_t i = 0; i < second.columns.size() && i < max_pair_columns; ++i) {
            hi_texts.push_back(serialize_column(second, second.columns[i], value_limit));
        }
        double best = 0.0;
        if (!lo_texts.empty() && !hi_texts.empty()) {
            std::vector<std::pair<std::string, std::string>> pairs;
            pairs.reserve(lo_texts.size() * hi_texts.size());
            for (const auto& a : lo_texts) {
                for (const auto& b : hi_texts) pairs.emplace_back(a, b);
            }
            for (const auto& score : scorer.score_pairs(pairs)) {
                best = std::max(best, score.value);
            }
        }
        return best;
    };
    if (cache) return cache->get_or_compute(table_a, table_b, compute);
    return compute();
}

std::vector<ScoredTable> rerank_candidates(PairScorer& scorer, const Corpus& corpus,
                                           const std::string& query_text,
                                           const std::vector<std::string>& candidates,
                                           std::size_t keep, std::size_t row_limit) {
    if (keep == 0 || candidates.empty()) return {};
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(candidates.size());
    for (const auto& table_id : candidates) {
        pairs.emplace_back(query_text, serialize_table(corpus.require(table_id), row_limit));
    }
    auto scores = scorer.score_pairs(pairs);
    std::vector<ScoredTable> ranked;
    ranked.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        ranked.push_back({candidates[i], scores[i].value});
    }
    sort_ranked(ranked);
    if (ranked.size() > keep) ranked.resize(keep);
    return ranked;
}

double attention_score(const std::vector<double>& neighbor_scores) {
    if (neighbor_scores.empty()) {
        throw Error(ErrorCode::NoNeighbors, "attention needs at least one neighbor score");
    }
    const double peak = *std::max_element(neighbor_scores.begin(), neighbor_scores.end());
    double denom = 0.0;
    for (double s : neighbor_scores) denom += std::exp(s - peak);
    double best = 0.0;
    for (double s : neighbor_scores) {
        best = std::max(best, std::exp(s - peak) / denom * s);
    }
    return best;
}

void ensure_scores(PairScorer& scorer, const Corpus& corpus, const std::string& query_text,
                   CandidateSet& candidates, const PipelineConfig& config,
                   PairScoreCache* cache, bool with_pairs) {
    std::vector<std::string> unscored;
    for (const auto& entry : candidates.tables) {
        if (!candidates.query_scores.count(entry.table_id)) unscored.push_back(entry.table_id);
    }
    std::sort(unscored.begin(), unscored.end());
    if (!unscored.empty()) {
        std::vector<std::pair<std::string, std::string>> pairs;
        pairs.reserve(unscored.size());
        for (const auto& id : unscored) {
            pairs.emplace_back(query_text, serialize_table(corpus.require(id), config.row_limit));
        }
        auto scores = scorer.score_pairs(pairs);
        for (std::size_t i = 0; i < unscored.size(); ++i) {
            candidates.query_scores[unscored[i]] = scores[i].value;
        }
    }
    if (!with_pairs) return;
    const auto ids = candidates.sorted_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            auto key = unordered_key(ids[i], ids[j]);
            if (candidates.pair_scores.count(key)) continue;
            candidates.pair_scores[key] =
                table_pair_score(scorer, corpus, ids[i], ids[j], config.max_pair_columns,
                                 config.value_limit, cache);
        }
    }
}

std::vector<ScoredTable> apply_strategy(PruneStrategy strategy, const CandidateSet& candidates,
                                        const PipelineConfig& config) {
    const auto tables = candidates.sorted_ids();
    std::vector<ScoredTable> scored;
    scored.reserve(tables.size());

    auto alpha_beta_score = [&](const std::string& id) {
        double neighbor_sum = 0.0;
        std::size_t n = 0;
        for (const auto& other : tables) {
            if (other == id) continue;
            neighbor_sum += candidates.pair(other, id) * candidates.query(other);
            ++n;
        }
        double s = config.ab_alpha * candidates.query(id);
        if (n > 0) s += config.ab_beta / static_cast<double>(n) * neighbor_sum;
        return s;
    };
    auto neighbor_peak = [&](const std::string& id) {
        double peak = 0.0;
        bool any = false;
        for (const auto& other : tables) {
            if (other == id) continue;
            peak = std::max({peak, candidates.pair(other, id), candidates.query(other)});
            any = true;
        }
        return std::make_pair(any, peak);
    };

    for (const auto& id : tables) {
        double s = 0.0;
        switch (strategy) {
        case PruneStrategy::refine: {
            std::vector<double> peers;
            for (const auto& other : tables) {
                if (other != id) peers.push_back(candidates.pair(id, other));
            }
            const double weight = peers.empty() ? 1.0 : attention_score(peers);
            s = candidates.query(id) * weight;
            break;
        }
        case PruneStrategy::alpha_beta:
        case PruneStrategy::adaptive:
            s = alpha_beta_score(id);
            break;
        case PruneStrategy::max1: {
            auto [any, peak] = neighbor_peak(id);
            s = config.ab_alpha * candidates.query(id) + (any ? config.ab_beta * peak : 0.0);
            break;
        }
        case PruneStrategy::max2: {
            auto [any, peak] = neighbor_peak(id);
            s = any ? std::max(candidates.query(id), peak) : candidates.query(id);
            break;
        }
        case PruneStrategy::none:
            s = candidates.query(id);
            break;
        }
        scored.push_back({id, s});
    }

    if (strategy == PruneStrategy::adaptive) {
        double mean = 0.0;
        for (const auto& entry : scored) mean += entry.score;
        mean /= scored.empty() ? 1.0 : static_cast<double>(scored.size());
        std::vector<ScoredTable> kept;
        for (const auto& entry : scored) {
            if (entry.score > mean) kept.push_back(entry);
        }
        sort_ranked(kept);
        return kept; // size floats with the score spread; k_final does not apply
    }
    sort_ranked(scored);
    if (scored.size() > config.k_final) scored.resize(config.k_final);
    return scored;
}

RankedList refine(PairScorer& scorer, const std::string& query_text, CandidateSet& expanded,
                  const Corpus& corpus, const PipelineConfig& config, PairScoreCache* cache) {
    ensure_scores(scorer, corpus, query_text, expanded, config, cache, true);
    RankedList out;
    out.entries = apply_strategy(PruneStrategy::refine, expanded, config);
    return out;
}

RankedList prune_variant(PruneStrategy strategy, PairScorer& scorer,
                         const std::string& query_text, CandidateSet& expanded,
                         const Corpus& corpus, const PipelineConfig& config,
                         PairScoreCache* cache) {
    if (strategy == PruneStrategy::none) {
        throw Error(ErrorCode::ConfigError, "strategy none is not a pruning formula");
    }
    ensure_scores(scorer, corpus, query_text, expanded, config, cache, true);
    RankedList out;
    out.entries = apply_strategy(strategy, expanded, config);
    return out;
}

StageTrace run_rear(const QueryRecord& query, const Corpus& corpus, const SparseIndex& sparse,
                    const DenseIndex* dense, const ColumnIndex& columns,
                    EmbeddingProvider* embedder, PairScorer& scorer,
                    const PipelineConfig& config, PairScoreCache* pair_cache) {
    config.validate();
    const CounterSnapshot before = counters_now(embedder, scorer);

    StageTrace trace;
    trace.query_id = query.query_id;
    trace.query_text = query.text;

    trace.base = search(config.mode, sparse, dense, embedder, query.text, config.k_base,
                        config.alpha_hybrid, config.sparse_scoring);
    trace.base.query_id = query.query_id;

    if (config.k_join > 0 && !trace.base.entries.empty()) {
        trace.join_candidates =
            expand_candidates(columns, trace.base.ids(), config.tau, config.ann_neighbors);
        std::vector<std::string> candidate_ids;
        candidate_ids.reserve(trace.join_candidates.size());
        for (const auto& candidate : trace.join_candidates) {
            candidate_ids.push_back(candidate.table_id);
        }
        trace.joined = rerank_candidates(scorer, corpus, query.text, candidate_ids,
                                         config.k_join, config.row_limit);
    }

    std::set<std::string> seen;
    for (const auto& entry : trace.base.entries) {
        if (seen.insert(entry.table_id).second) {
            trace.expanded.tables.push_back({entry.table_id, CandidateSource::base});
        }
    }
    for (const auto& entry : trace.joined) {
        if (seen.insert(entry.table_id).second) {
            trace.expanded.tables.push_back({entry.table_id, CandidateSource::joined});
            trace.expanded.query_scores[entry.table_id] = entry.score; // rerank paid already
        }
    }

    trace.final.query_id = query.query_id;
    if (config.strategy == PruneStrategy::none && config.k_join == 0) {
        // Pipeline collapse: no expansion, no pruning formula — stage-1
        // output passes through untouched.
        trace.final.entries = trace.base.entries;
        if (trace.final.entries.size() > config.k_final) {
            trace.final.entries.resize(config.k_final);
        }
    } else {
        ensure_scores(scorer, corpus, query.text, trace.expanded, config, pair_cache,
                      config.strategy != PruneStrategy::none);
        trace.final.entries = apply_strategy(config.strategy, trace.expanded, config);
    }
    trace.provider_calls = counters_now(embedder, scorer) - before;
    return trace;
}

std::string trace_to_json(const StageTrace& trace) {
    ordered_json doc;
    doc["query_id"] = trace.query_id;
    doc["query_text"] = trace.query_text;
    auto id_list = [](const auto& entries, auto&& project) {
        ordered_json rows = ordered_json::array();
        for (const auto& entry : entries) rows.push_back(project(entry));
        return rows;
    };
    doc["base"] =
        id_list(trace.base.entries, [](const ScoredTable& entry) { return entry.table_id; });
    doc["join_candidates"] = id_list(
        trace.join_candidates, [](const JoinCandidate& entry) { return entry.table_id; });
    doc["joined"] =
        id_list(trace.joined, [](const ScoredTable& entry) { return entry.table_id; });
    doc["expanded"] = id_list(trace.expanded.tables,
                              [](const CandidateEntry& entry) { return entry.table_id; });
    ordered_json final_rows = ordered_json::array();
    for (const auto& entry : trace.final.entries) {
        final_rows.push_back({{"id", entry.table_id}, {"score", entry.score}});
    }
    doc["final"] = std::move(final_rows);
    doc["counters"] = {{"embed_calls", trace.provider_calls.embed_calls},
                       {"embed_texts", trace.provider_calls.embed_texts},
                       {"pair_calls", trace.provider_calls.pair_calls},
                       {"pair_items", trace.provider_calls.pair_items}};
    return doc.dump(2) + "\n";
}

} // namespace rear
