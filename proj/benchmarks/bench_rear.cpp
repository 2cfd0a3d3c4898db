#include "rear/corpus.hpp"
#include "rear/join.hpp"
#include "rear/pipeline.hpp"
#include "rear/providers.hpp"
#include "rear/retrieval.hpp"

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace {

// Synthetic corpus with overlapping vocabulary so postings and join edges
// are non-trivial: `tables` tables, 4 columns each, values drawn from a
// shared pool of 120 words.
rear::Corpus make_corpus(std::size_t tables, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    rear::Corpus corpus;
    for (std::size_t t = 0; t < tables; ++t) {
        rear::TableRecord table;
        table.table_id = "t" + std::to_string(t);
        table.title = "table " + std::to_string(t) + " word" + std::to_string(rng() % 120);
        for (std::size_t c = 0; c < 4; ++c) {
            rear::ColumnRecord column;
            column.table_id = table.table_id;
            column.name = "col" + std::to_string(rng() % 12);
            while (std::any_of(table.columns.begin(), table.columns.end(),
                               [&](const rear::ColumnRecord& prev) {
                                   return prev.name == column.name;
                               })) {
                column.name += "x";
            }
            const std::size_t values = 4 + rng() % 8;
            for (std::size_t v = 0; v < values; ++v) {
                column.values.push_back("word" + std::to_string(rng() % 120));
            }
            table.columns.push_back(std::move(column));
        }
        table.row_count = 12;
        corpus.tables.emplace(table.table_id, std::move(table));
    }
    return corpus;
}

struct Fixture {
    rear::Corpus corpus;
    rear::HashEmbedder embedder{64, 42};
    rear::LexicalOverlapScorer scorer;
    rear::SparseIndex sparse;
    rear::DenseIndex dense;
    rear::ColumnIndex columns_exact;
    rear::ColumnIndex columns_ann;

    explicit Fixture(std::size_t tables) : corpus(make_corpus(tables, 7)) {
        sparse = rear::build_sparse_index(corpus, rear::kDefaultRowLimit);
        dense = rear::build_dense_index(corpus, embedder, rear::kDefaultRowLimit);
        columns_exact = rear::build_column_index(corpus, embedder, rear::kDefaultValueLimit,
                                                 rear::AnnMode::ForceExact);
        columns_ann = rear::build_column_index(corpus, embedder, rear::kDefaultValueLimit,
                                               rear::AnnMode::ForceAnn);
    }
};

Fixture& fixture() {
    static Fixture f(200);
    return f;
}

void BM_sparse_search(benchmark::State& state) {
    auto& f = fixture();
    std::size_t q = 0;
    for (auto _ : state) {
        const std::string query = "word" + std::to_string(q++ % 120) + " table";
        benchmark::DoNotOptimize(rear::search(rear::RetrievalMode::sparse, f.sparse, nullptr,
                                              nullptr, query, 10));
    }
}
BENCHMARK(BM_sparse_search);

void BM_hybrid_search(benchmark::State& state) {
    auto& f = fixture();
    std::size_t q = 0;
    for (auto _ : state) {
        const std::string query = "word" + std::to_string(q++ % 120) + " table";
        benchmark::DoNotOptimize(rear::search(rear::RetrievalMode::hybrid, f.sparse, &f.dense,
                                              &f.embedder, query, 10));
    }
}
BENCHMARK(BM_hybrid_search);

void BM_expand_exact(benchmark::State& state) {
    auto& f = fixture();
    const std::vector<std::string> base = {"t0", "t1", "t2", "t3", "t4"};
    for (auto _ : state) {
        benchmark::DoNotOptimize(rear::expand_candidates(f.columns_exact, base, 0.5, 10));
    }
}
BENCHMARK(BM_expand_exact);

void BM_expand_ann(benchmark::State& state) {
    auto& f = fixture();
    const std::vector<std::string> base = {"t0", "t1", "t2", "t3", "t4"};
    for (auto _ : state) {
        benchmark::DoNotOptimize(rear::expand_candidates(f.columns_ann, base, 0.5, 10));
    }
}
BENCHMARK(BM_expand_ann);

void BM_run_rear(benchmark::State& state) {
    auto& f = fixture();
    rear::PipelineConfig config;
    config.tau = 0.5;
    rear::QueryRecord query;
    query.query_id = "bench";
    std::size_t q = 0;
    for (auto _ : state) {
        query.text = "word" + std::to_string(q++ % 120) + " table";
        benchmark::DoNotOptimize(rear::run_rear(query, f.corpus, f.sparse, nullptr,
                                                f.columns_exact, nullptr, f.scorer, config));
    }
}
BENCHMARK(BM_run_rear);

void BM_refine_scoring(benchmark::State& state) {
    // Pure stage-3 arithmetic on a pre-scored candidate set of the given size.
    const auto n = static_cast<std::size_t>(state.range(0));
    rear::CandidateSet set;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back("t" + std::to_string(i));
        set.tables.push_back({ids.back(), rear::CandidateSource::base});
        set.query_scores[ids.back()] = unit(rng);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            set.pair_scores[std::minmax(ids[i], ids[j])] = unit(rng);
        }
    }
    rear::PipelineConfig config;
    config.k_base = n;
    config.k_final = 5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(rear::apply_strategy(rear::PruneStrategy::refine, set, config));
    }
}
BENCHMARK(BM_refine_scoring)->Arg(8)->Arg(16)->Arg(32);

} // namespace

BENCHMARK_MAIN();
