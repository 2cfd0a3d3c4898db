// Command-line front end: ingest, index, retrieve, eval, join-graph,
// compare-strategies. Every pipeline knob is a dotted flag that can also be
// set from an INI config file with matching sections.

#include "rear/corpus.hpp"
#include "rear/embedding_cache.hpp"
#include "rear/errors.hpp"
#include "rear/eval.hpp"
#include "rear/http_providers.hpp"
#include "rear/join.hpp"
#include "rear/pipeline.hpp"
#include "rear/providers.hpp"
#include "rear/retrieval.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

using rear::Error;
using rear::ErrorCode;

/// INI reader that folds `[section]` + `key` into the flat option name
/// `section.key`, so sections address the dotted flags directly instead of
/// CLI11's default subcommand lookup.
class FlatSectionConfig : public CLI::ConfigINI {
  public:
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::vector<CLI::ConfigItem> flat;
        for (auto& item : CLI::ConfigINI::from_config(input)) {
            if (item.name == "++" || item.name == "--") {
                continue; // section open/close markers
            }
            for (auto parent = item.parents.rbegin(); parent != item.parents.rend(); ++parent) {
                item.name = *parent + "." + item.name;
            }
            item.parents.clear();
            flat.push_back(std::move(item));
        }
        return flat;
    }
};

struct Options {
    std::uint64_t seed = 42;
    std::size_t parallelism = 1;
    // retrieval
    std::string mode = "sparse";
    std::string sparse_scoring = "bm25";
    double alpha_hybrid = 0.5;
    std::size_t row_limit = rear::kDefaultRowLimit;
    // join
    double tau = 0.7;
    std::size_t ann_neighbors = 10;
    std::string ann_mode = "auto";
    std::size_t value_limit = rear::kDefaultValueLimit;
    // pipeline
    std::size_t k_base = 5;
    std::size_t k_join = 3;
    std::size_t k_final = 5;
    std::string strategy = "refine";
    double ab_alpha = 0.6;
    double ab_beta = 0.4;
    std::size_t max_pair_columns = 30;
    // providers
    std::string embed_url;
    std::string embed_model = "embedder";
    std::string rerank_url;
    std::string rerank_model = "reranker";
    std::size_t embed_dim = 64;
    std::size_t provider_batch = 64;
    std::string embed_cache; // path; empty disables the disk cache
};

rear::PipelineConfig pipeline_config(const Options& opt) {
    rear::PipelineConfig config;
    config.k_base = opt.k_base;
    config.k_join = opt.k_join;
    config.k_final = opt.k_final;
    config.tau = opt.tau;
    config.alpha_hybrid = opt.alpha_hybrid;
    config.mode = rear::parse_retrieval_mode(opt.mode);
    config.sparse_scoring = rear::parse_sparse_scoring(opt.sparse_scoring);
    config.strategy = rear::parse_prune_strategy(opt.strategy);
    config.ab_alpha = opt.ab_alpha;
    config.ab_beta = opt.ab_beta;
    config.ann_neighbors = opt.ann_neighbors;
    config.row_limit = opt.row_limit;
    config.value_limit = opt.value_limit;
    config.max_pair_columns = opt.max_pair_columns;
    config.validate();
    return config;
}

rear::HnswParams hnsw_params(const Options& opt) {
    rear::HnswParams params;
    params.seed = opt.seed;
    return params;
}

struct Providers {
    std::unique_ptr<rear::EmbeddingProvider> embedder_impl;
    std::unique_ptr<rear::CachedEmbedder> cache;
    std::unique_ptr<rear::PairScorer> scorer;

    rear::EmbeddingProvider& embedder() {
        if (cache) return *cache;
        return *embedder_impl;
    }
};

Providers make_providers(const Options& opt) {
    Providers p;
    if (opt.embed_url.empty()) {
        p.embedder_impl = std::make_unique<rear::HashEmbedder>(opt.embed_dim, opt.seed);
    } else {
        rear::HttpProviderConfig config;
        config.url = opt.embed_url;
        config.model = opt.embed_model;
        config.max_batch = opt.provider_batch;
        p.embedder_impl = std::make_unique<rear::HttpEmbedder>(config);
    }
    if (!opt.embed_cache.empty()) {
        p.cache = std::make_unique<rear::CachedEmbedder>(*p.embedder_impl, opt.embed_cache);
    }
    if (opt.rerank_url.empty()) {
        p.scorer = std::make_unique<rear::LexicalOverlapScorer>();
    } else {
        rear::HttpProviderConfig config;
        config.url = opt.rerank_url;
        config.model = opt.rerank_model;
        config.max_batch = opt.provider_batch;
        p.scorer = std::make_unique<rear::HttpPairScorer>(config, /*unit_range_scores=*/false);
    }
    return p;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

struct BuiltIndexes {
    rear::SparseIndex sparse;
    rear::DenseIndex dense;
    rear::ColumnIndex columns;
    bool has_dense = false;
};

BuiltIndexes build_indexes_for(const rear::Corpus& corpus, const Options& opt,
                               rear::EmbeddingProvider& embedder,
                               const rear::PipelineConfig& config, bool need_dense) {
    BuiltIndexes built;
    built.sparse = rear::build_sparse_index(corpus, config.row_limit);
    if (need_dense) {
        built.dense = rear::build_dense_index(corpus, embedder, config.row_limit);
        built.has_dense = true;
    }
    built.columns = rear::build_column_index(corpus, embedder, config.value_limit,
                                             rear::parse_ann_mode(opt.ann_mode),
                                             hnsw_params(opt));
    return built;
}

int cmd_ingest(const std::string& corpus_path, const std::string& queries_path) {
    auto corpus = rear::ingest_corpus(corpus_path);
    auto stats = rear::corpus_stats(corpus);
    std::printf("%-12s %zu\n", "tables", stats.total_tables);
    std::printf("%-12s %.2f\n", "avg columns", stats.avg_columns);
    std::printf("%-12s %.2f\n", "avg rows", stats.avg_rows);
    if (!queries_path.empty()) {
        auto queries = rear::load_queries(queries_path, corpus);
        std::printf("%-12s %zu\n", "queries", queries.size());
    }
    return 0;
}

int cmd_index(const std::string& corpus_path, const std::string& out_dir, const Options& opt) {
    auto corpus = rear::ingest_corpus(corpus_path);
    auto config = pipeline_config(opt);
    auto providers = make_providers(opt);
    auto built = build_indexes_for(corpus, opt, providers.embedder(), config, true);
    std::filesystem::path dir(out_dir);
    rear::save_sparse_index(built.sparse, dir / "sparse.json");
    rear::save_dense_index(built.dense, dir / "dense.json");
    rear::save_column_index(built.columns, dir / "columns.json");
    std::printf("wrote %s\n", (dir / "sparse.json").c_str());
    std::printf("wrote %s\n", (dir / "dense.json").c_str());
    std::printf("wrote %s\n", (dir / "columns.json").c_str());
    return 0;
}

int cmd_retrieve(const std::string& corpus_path, const std::string& text,
                 const std::string& queries_path, const std::string& query_id,
                 const std::string& out, const Options& opt) {
    auto corpus = rear::ingest_corpus(corpus_path);
    rear::QueryRecord query;
    if (!text.empty()) {
        query.query_id = "adhoc";
        query.text = text;
    } else {
        auto queries = rear::load_queries(queries_path, corpus);
        auto it = std::find_if(queries.begin(), queries.end(), [&](const rear::QueryRecord& q) {
            return q.query_id == query_id;
        });
        if (it == queries.end()) {
            throw Error(ErrorCode::MalformedRecord,
                        "query id '" + query_id + "' not present in " + queries_path);
        }
        query = *it;
    }
    auto config = pipeline_config(opt);
    auto providers = make_providers(opt);
    const bool need_dense = config.mode != rear::RetrievalMode::sparse;
    auto built = build_indexes_for(corpus, opt, providers.embedder(), config, need_dense);
    auto trace = rear::run_rear(query, corpus, built.sparse,
                                built.has_dense ? &built.dense : nullptr, built.columns,
                                &providers.embedder(), *providers.scorer, config);
    write_output(out, rear::trace_to_json(trace));
    return 0;
}

int cmd_eval(const std::string& corpus_path, const std::string& queries_path,
             const std::string& out, const Options& opt) {
    auto corpus = rear::ingest_corpus(corpus_path);
    auto queries = rear::load_queries(queries_path, corpus);
    auto config = pipeline_config(opt);
    auto providers = make_providers(opt);
    const bool need_dense = config.mode != rear::RetrievalMode::sparse;
    auto built = build_indexes_for(corpus, opt, providers.embedder(), config, need_dense);
    auto report = rear::evaluate_queries(queries, corpus, built.sparse,
                                         built.has_dense ? &built.dense : nullptr,
                                         built.columns, &providers.embedder(),
                                         *providers.scorer, config, opt.parallelism);
    std::printf("%s\n", rear::render_row_header().c_str());
    std::printf("%s\n", rear::render_report_row(opt.strategy, report).c_str());
    if (!out.empty()) write_output(out, rear::report_to_json(report));
    return 0;
}

int cmd_join_graph(const std::string& corpus_path, const std::string& out,
                   const Options& opt) {
    auto corpus = rear::ingest_corpus(corpus_path);
    auto providers = make_providers(opt);
    auto index = rear::build_column_index(corpus, providers.embedder(), opt.value_limit,
                                          rear::parse_ann_mode(opt.ann_mode),
                                          hnsw_params(opt));
    auto edges = rear::all_join_edges(index, opt.tau, opt.ann_neighbors);
    std::string lines;
    for (const auto& edge : edges) {
        nlohmann::ordered_json row = {{"table_a", edge.table_a},
                                      {"column_a", edge.column_a},
                                      {"table_b", edge.table_b},
                                      {"column_b", edge.column_b},
                                      {"sim", edge.sim}};
        lines += row.dump();
        lines += '\n';
    }
    write_output(out, lines);
    return 0;
}

int cmd_compare(const std::string& corpus_path, const std::string& queries_path,
                const std::string& out, const Options& opt) {
    auto corpus = rear::ingest_corpus(corpus_path);
    auto queries = rear::load_queries(queries_path, corpus);
    auto base_config = pipeline_config(opt);
    auto providers = make_providers(opt);
    const bool need_dense = base_config.mode != rear::RetrievalMode::sparse;
    auto built = build_indexes_for(corpus, opt, providers.embedder(), base_config, need_dense);

    static const char* kStrategies[] = {"refine", "alpha_beta", "adaptive",
                                        "max1",   "max2",       "none"};
    std::printf("%s\n", rear::render_row_header().c_str());
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    for (const char* name : kStrategies) {
        auto config = base_config;
        config.strategy = rear::parse_prune_strategy(name);
        auto report = rear::evaluate_queries(queries, corpus, built.sparse,
                                             built.has_dense ? &built.dense : nullptr,
                                             built.columns, &providers.embedder(),
                                             *providers.scorer, config, opt.parallelism);
        std::printf("%s\n", rear::render_report_row(name, report).c_str());
        double retrieved = 0.0;
        for (const auto& m : report.per_query) {
            retrieved += static_cast<double>(m.retrieved_count);
        }
        retrieved /= static_cast<double>(report.per_query.size());
        summary[name] = {{"recall", rear::render_percent(report.mean_recall)},
                         {"precision", rear::render_percent(report.mean_precision)},
                         {"full_recall", rear::render_percent(report.mean_full_recall)},
                         {"avg_retrieved", retrieved}};
    }
    if (!out.empty()) write_output(out, summary.dump(2) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-table retrieval: retrieve, expand along joins, refine"};
    app.require_subcommand(1);
    app.fallthrough(); // dotted pipeline flags may follow the subcommand
    app.set_config("--config", "",
                   "INI config with sections [retrieval] [join] [pipeline] [providers]");
    app.config_formatter(std::make_shared<FlatSectionConfig>());
    app.allow_config_extras(false);

    Options opt;
    app.add_option("--seed", opt.seed, "seed for hashing and graph construction")
        ->capture_default_str();
    app.add_option("--parallelism", opt.parallelism, "worker threads for eval")
        ->capture_default_str();

    app.add_option("--retrieval.mode", opt.mode, "sparse | dense | hybrid")
        ->capture_default_str()
        ->check(CLI::IsMember({"sparse", "dense", "hybrid"}));
    app.add_option("--retrieval.sparse_scoring", opt.sparse_scoring, "bm25 | tfidf")
        ->capture_default_str()
        ->check(CLI::IsMember({"bm25", "tfidf"}));
    app.add_option("--retrieval.alpha_hybrid", opt.alpha_hybrid,
                   "sparse weight in hybrid fusion")
        ->capture_default_str();
    app.add_option("--retrieval.row_limit", opt.row_limit, "rows kept in table text")
        ->capture_default_str();

    app.add_option("--join.tau", opt.tau, "joinability threshold")->capture_default_str();
    app.add_option("--join.ann_neighbors", opt.ann_neighbors, "neighbor probes per column")
        ->capture_default_str();
    app.add_option("--join.ann_mode", opt.ann_mode, "auto | ann | exact")
        ->capture_default_str()
        ->check(CLI::IsMember({"auto", "ann", "exact"}));
    app.add_option("--join.value_limit", opt.value_limit, "values kept in column text")
        ->capture_default_str();

    app.add_option("--pipeline.k_base", opt.k_base, "stage-1 pool size")->capture_default_str();
    app.add_option("--pipeline.k_join", opt.k_join, "join candidates kept")
        ->capture_default_str();
    app.add_option("--pipeline.k_final", opt.k_final, "tables returned")->capture_default_str();
    app.add_option("--pipeline.strategy", opt.strategy,
                   "refine | alpha_beta | adaptive | max1 | max2 | none")
        ->capture_default_str()
        ->check(CLI::IsMember({"refine", "alpha_beta", "adaptive", "max1", "max2", "none"}));
    app.add_option("--pipeline.ab_alpha", opt.ab_alpha, "query weight in pruning variants")
        ->capture_default_str();
    app.add_option("--pipeline.ab_beta", opt.ab_beta, "neighbor weight in pruning variants")
        ->capture_default_str();
    app.add_option("--pipeline.max_pair_columns", opt.max_pair_columns,
                   "columns per side in table pair scoring")
        ->capture_default_str();

    app.add_option("--providers.embed.url", opt.embed_url,
                   "embedding service URL (empty = hashing mock)")
        ->envname("REAR_EMBED_URL");
    app.add_option("--providers.embed.model", opt.embed_model, "embedding model name")
        ->capture_default_str();
    app.add_option("--providers.rerank.url", opt.rerank_url,
                   "pair scoring service URL (empty = lexical mock)")
        ->envname("REAR_RERANK_URL");
    app.add_option("--providers.rerank.model", opt.rerank_model, "pair scoring model name")
        ->capture_default_str();
    app.add_option("--providers.embed_dim", opt.embed_dim, "mock embedder dimensions")
        ->capture_default_str();
    app.add_option("--providers.max_batch", opt.provider_batch, "texts per provider call")
        ->capture_default_str();
    app.add_option("--providers.embed_cache", opt.embed_cache,
                   "embedding disk cache path (off when empty)");

    std::string corpus_path;
    std::string queries_path;
    std::string out_path;
    std::string query_text;
    std::string query_id;

    auto* ingest = app.add_subcommand("ingest", "validate a corpus and print its stats");
    ingest->add_option("--corpus", corpus_path, "corpus JSONL path")->required();
    ingest->add_option("--queries", queries_path, "optional query file to validate");

    auto* index = app.add_subcommand("index", "build and persist all indexes");
    index->add_option("--corpus", corpus_path, "corpus JSONL path")->required();
    index->add_option("--out", out_path, "output directory")->required();

    auto* retrieve = app.add_subcommand("retrieve", "run one query and print the stage trace");
    retrieve->add_option("--corpus", corpus_path, "corpus JSONL path")->required();
    retrieve->add_option("--text", query_text, "ad-hoc query text");
    retrieve->add_option("--queries", queries_path, "query file");
    retrieve->add_option("--query-id", query_id, "query id within --queries");
    retrieve->add_option("--out", out_path, "trace output path (default stdout)");

    auto* eval = app.add_subcommand("eval", "evaluate a query file");
    eval->add_option("--corpus", corpus_path, "corpus JSONL path")->required();
    eval->add_option("--queries", queries_path, "query file")->required();
    eval->add_option("--out", out_path, "report output path");

    auto* graph = app.add_subcommand("join-graph", "dump column join edges above tau");
    graph->add_option("--corpus", corpus_path, "corpus JSONL path")->required();
    graph->add_option("--out", out_path, "edge list output path (default stdout)");

    auto* compare = app.add_subcommand("compare-strategies",
                                       "evaluate once per pruning strategy");
    compare->add_option("--corpus", corpus_path, "corpus JSONL path")->required();
    compare->add_option("--queries", queries_path, "query file")->required();
    compare->add_option("--out", out_path, "summary output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(retrieve)) {
            if (query_text.empty() == (queries_path.empty() || query_id.empty())) {
                throw Error(ErrorCode::ConfigError,
                            "retrieve needs --text or both --queries and --query-id");
            }
        }
        if (app.got_subcommand(ingest)) return cmd_ingest(corpus_path, queries_path);
        if (app.got_subcommand(index)) return cmd_index(corpus_path, out_path, opt);
        if (app.got_subcommand(retrieve)) {
            return cmd_retrieve(corpus_path, query_text, queries_path, query_id, out_path, opt);
        }
        if (app.got_subcommand(eval)) return cmd_eval(corpus_path, queries_path, out_path, opt);
        if (app.got_subcommand(graph)) return cmd_join_graph(corpus_path, out_path, opt);
        if (app.got_subcommand(compare)) {
            return cmd_compare(corpus_path, queries_path, out_path, opt);
        }
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rear::exit_status(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
