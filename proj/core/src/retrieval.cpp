#include "rear/retrieval.hpp"

#include "rear/errors.hpp"
#include "rear/text.hpp"

#include "io_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace rear {
namespace {

using ordered_json = nlohmann::ordered_json;

const std::vector<std::pair<std::string, std::uint32_t>>* find_postings(
    const SparseIndex& index, const std::string& token) {
    auto it = index.postings.find(token);
    if (it == index.postings.end()) return nullptr;
    return &it->second;
}

std::uint32_t term_frequency(const std::vector<std::pair<std::string, std::uint32_t>>& list,
                             const std::string& table_id) {
    auto it = std::lower_bound(list.begin(), list.end(), table_id,
                               [](const auto& entry, const std::string& id) {
                                   return entry.first < id;
                               });
    if (it == list.end() || it->first != table_id) return 0;
    return it->second;
}

double robertson_idf(std::size_t n_docs, std::size_t df) {
    double idf = std::log((static_cast<double>(n_docs) - static_cast<double>(df) + 0.5) /
                              (static_cast<double>(df) + 0.5) +
                          1.0);
    return idf < 0.0 ? 0.0 : idf;
}

double smoothed_idf(std::size_t n_docs, std::size_t df) {
    return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df))) + 1.0;
}

ordered_json parse_index_json(const std::string& text, const char* expected_kind) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IoError, std::string("unparseable index dump: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("format_version") ||
        doc["format_version"].get<int>() != 1) {
        throw Error(ErrorCode::IoError, "unsupported index format");
    }
    if (doc.value("kind", std::string()) != expected_kind) {
        throw Error(ErrorCode::IoError,
                    std::string("expected a ") + expected_kind + " index dump");
    }
    return doc;
}

} // namespace

std::vector<std::string> RankedList::ids() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& entry : entries) out.push_back(entry.table_id);
    return out;
}

bool RankedList::contains(const std::string& table_id) const {
    return std::any_of(entries.begin(), entries.end(),
                       [&](const ScoredTable& s) { return s.table_id == table_id; });
}

RetrievalMode parse_retrieval_mode(const std::string& name) {
    if (name == "sparse") return RetrievalMode::sparse;
    if (name == "dense") return RetrievalMode::dense;
    if (name == "hybrid") return RetrievalMode::hybrid;
    throw Error(ErrorCode::ConfigError, "unknown retrieval mode: " + name);
}

const char* to_string(RetrievalMode mode) {
    switch (mode) {
    case RetrievalMode::sparse: return "sparse";
    case RetrievalMode::dense: return "dense";
    case RetrievalMode::hybrid: return "hybrid";
    }
    return "?";
}

SparseScoring parse_sparse_scoring(const std::string& name) {
    if (name == "bm25") return SparseScoring::bm25;
    if (name == "tfidf") return SparseScoring::tfidf;
    throw Error(ErrorCode::ConfigError, "unknown sparse scoring: " + name);
}

const char* to_string(SparseScoring scoring) {
    return scoring == SparseScoring::bm25 ? "bm25" : "tfidf";
}

SparseIndex build_sparse_index(const Corpus& corpus, std::size_t row_limit, Bm25Params params) {
    SparseIndex index;
    index.params = params;
    index.row_limit = row_limit;
    index.table_count = corpus.size();
    std::uint64_t total_len = 0;
    for (const auto& [table_id, table] : corpus.tables) {
        auto tokens = tokenize(serialize_table(table, row_limit));
        index.doc_lengths[table_id] = tokens.size();
        total_len += tokens.size();
        std::unordered_map<std::string, std::uint32_t> tf;
        for (const auto& token : tokens) ++tf[token];
        for (const auto& [token, f] : tf) index.postings[token].emplace_back(table_id, f);
    }
    // corpus.tables is ordered, so postings lists come out sorted by table_id.
    index.avgdl =
        index.table_count == 0 ? 0.0 : static_cast<double>(total_len) / index.table_count;
    return index;
}

DenseIndex build_dense_index(const Corpus& corpus, EmbeddingProvider& embedder,
                             std::size_t row_limit) {
    DenseIndex index;
    index.embedder_id = embedder.id();
    index.row_limit = row_limit;
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    ids.reserve(corpus.size());
    texts.reserve(corpus.size());
    for (const auto& [table_id, table] : corpus.tables) {
        ids.push_back(table_id);
        texts.push_back(serialize_table(table, row_limit));
    }
    auto vectors = embedder.embed_batch(texts);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        index.vectors.emplace(ids[i], std::move(vectors[i]));
    }
    index.dim = index.vectors.empty() ? 0 : index.vectors.begin()->second.dim();
    return index;
}

std::pair<SparseIndex, DenseIndex> build_indexes(const Corpus& corpus,
                                                 EmbeddingProvider& embedder,
                                                 std::size_t row_limit) {
    return {build_sparse_index(corpus, row_limit),
            build_dense_index(corpus, embedder, row_limit)};
}

double bm25_score(const SparseIndex& index, const std::string& query,
                  const std::string& table_id) {
    auto len_it = index.doc_lengths.find(table_id);
    if (len_it == index.doc_lengths.end()) throw Error(ErrorCode::UnknownTable, table_id);
    const double dl = static_cast<double>(len_it->second);
    const double len_ratio = index.avgdl > 0.0 ? dl / index.avgdl : 0.0;
    const double k1 = index.params.k1;
    const double b = index.params.b;
    double score = 0.0;
    for (const auto& token : tokenize(query)) {
        const auto* list = find_postings(index, token);
        if (!list) continue;
        const double f = term_frequency(*list, table_id);
        if (f == 0.0) continue;
        const double idf = robertson_idf(index.table_count, list->size());
        score += idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len_ratio));
    }
    return score;
}

double tfidf_score(const SparseIndex& index, const std::string& query,
                   const std::string& table_id) {
    auto len_it = index.doc_lengths.find(table_id);
    if (len_it == index.doc_lengths.end()) throw Error(ErrorCode::UnknownTable, table_id);
    const double dl = static_cast<double>(len_it->second);
    if (dl == 0.0) return 0.0;
    double score = 0.0;
    for (const auto& token : tokenize(query)) {
        const auto* list = find_postings(index, token);
        if (!list) continue;
        const double f = term_frequency(*list, table_id);
        if (f == 0.0) continue;
        score += (f / dl) * smoothed_idf(index.table_count, list->size());
    }
    return score;
}

void sort_ranked(std::vector<ScoredTable>& entries) {
    std::sort(entries.begin(), entries.end(), [](const ScoredTable& a, const ScoredTable& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.table_id < b.table_id;
    });
}

namespace {

std::map<std::string, double> sparse_scores_for(const SparseIndex& index,
                                                const std::string& query,
                                                SparseScoring scoring) {
    std::map<std::string, double> scores;
    for (const auto& [table_id, len] : index.doc_lengths) {
        (void)len;
        scores[table_id] = scoring == SparseScoring::bm25 ? bm25_score(index, query, table_id)
                                                          : tfidf_score(index, query, table_id);
    }
    return scores;
}

std::map<std::string, double> dense_scores_for(const DenseIndex& index,
                                               EmbeddingProvider& embedder,
                                               const std::string& query) {
    auto query_vec = embedder.embed_batch({query}).front();
    std::map<std::string, double> scores;
    for (const auto& [table_id, vec] : index.vectors) {
        scores[table_id] = cosine(query_vec, vec);
    }
    return scores;
}

// Per-query min-max over the whole corpus; a constant family normalizes to 0.
void minmax_normalize(std::map<std::string, double>& scores) {
    if (scores.empty()) return;
    double lo = scores.begin()->second;
    double hi = lo;
    for (const auto& [id, s] : scores) {
        (void)id;
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    const double range = hi - lo;
    for (auto& [id, s] : scores) {
        (void)id;
        s = range > 0.0 ? (s - lo) / range : 0.0;
    }
}

} // namespace

RankedList search(RetrievalMode mode, const SparseIndex& sparse, const DenseIndex* dense,
                  EmbeddingProvider* embedder, const std::string& query, std::size_t k,
                  double alpha, SparseScoring scoring) {
    if (mode != RetrievalMode::sparse) {
        if (!dense || !embedder) {
            throw Error(ErrorCode::ConfigError,
                        "dense index and embedder required for dense/hybrid search");
        }
    }
    std::map<std::string, double> fused;
    switch (mode) {
    case RetrievalMode::sparse:
        fused = sparse_scores_for(sparse, query, scoring);
        break;
    case RetrievalMode::dense:
        fused = dense_scores_for(*dense, *embedder, query);
        break;
    case RetrievalMode::hybrid: {
        auto s = sparse_scores_for(sparse, query, scoring);
        auto d = dense_scores_for(*dense, *embedder, query);
        minmax_normalize(s);
        minmax_normalize(d);
        for (const auto& [table_id, sv] : s) {
            fused[table_id] = alpha * sv + (1.0 - alpha) * d.at(table_id);
        }
        break;
    }
    }
    std::vector<ScoredTable> entries;
    entries.reserve(fused.size());
    for (const auto& [table_id, score] : fused) entries.push_back({table_id, score});
    sort_ranked(entries);
    if (entries.size() > k) entries.resize(k);
    RankedList out;
    out.entries = std::move(entries);
    return out;
}

std::string sparse_index_to_string(const SparseIndex& index) {
    ordered_json doc;
    doc["format_version"] = 1;
    doc["kind"] = "sparse";
    doc["params"] = {{"k1", index.params.k1}, {"b", index.params.b}};
    doc["row_limit"] = index.row_limit;
    doc["table_count"] = index.table_count;
    doc["avgdl"] = index.avgdl;
    ordered_json lengths = ordered_json::object();
    for (const auto& [table_id, len] : index.doc_lengths) lengths[table_id] = len;
    doc["doc_lengths"] = std::move(lengths);
    ordered_json postings = ordered_json::object();
    for (const auto& [token, list] : index.postings) {
        ordered_json rows = ordered_json::array();
        for (const auto& [table_id, tf] : list) rows.push_back({table_id, tf});
        postings[token] = std::move(rows);
    }
    doc["postings"] = std::move(postings);
    return doc.dump() + "\n";
}

SparseIndex sparse_index_from_string(const std::string& text) {
    auto doc = parse_index_json(text, "sparse");
    SparseIndex index;
    try {
        index.params.k1 = doc.at("params").at("k1").get<double>();
        index.params.b = doc.at("params").at("b").get<double>();
        index.row_limit = doc.at("row_limit").get<std::size_t>();
        index.table_count = doc.at("table_count").get<std::size_t>();
        index.avgdl = doc.at("avgdl").get<double>();
        for (const auto& [table_id, len] : doc.at("doc_lengths").items()) {
            index.doc_lengths[table_id] = len.get<std::uint64_t>();
        }
        for (const auto& [token, rows] : doc.at("postings").items()) {
            auto& list = index.postings[token];
            for (const auto& row : rows) {
                list.emplace_back(row.at(0).get<std::string>(), row.at(1).get<std::uint32_t>());
            }
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IoError, std::string("bad sparse index dump: ") + e.what());
    }
    return index;
}

std::string dense_index_to_string(const DenseIndex& index) {
    ordered_json doc;
    doc["format_version"] = 1;
    doc["kind"] = "dense";
    doc["embedder_id"] = index.embedder_id;
    doc["dim"] = index.dim;
    doc["row_limit"] = index.row_limit;
    ordered_json vectors = ordered_json::object();
    for (const auto& [table_id, vec] : index.vectors) {
        ordered_json row = ordered_json::array();
        for (float component : vec.components) row.push_back(static_cast<double>(component));
        vectors[table_id] = std::move(row);
    }
    doc["vectors"] = std::move(vectors);
    return doc.dump() + "\n";
}

DenseIndex dense_index_from_string(const std::string& text) {
    auto doc = parse_index_json(text, "dense");
    DenseIndex index;
    try {
        index.embedder_id = doc.at("embedder_id").get<std::string>();
        index.dim = doc.at("dim").get<std::size_t>();
        index.row_limit = doc.at("row_limit").get<std::size_t>();
        for (const auto& [table_id, row] : doc.at("vectors").items()) {
            EmbeddingVector vec;
            vec.components.reserve(row.size());
            for (const auto& component : row) {
                vec.components.push_back(static_cast<float>(component.get<double>()));
            }
            if (vec.dim() != index.dim) {
                throw Error(ErrorCode::DimensionMismatch,
                            "vector for " + table_id + " has dim " +
                                std::to_string(vec.dim()));
            }
            index.vectors.emplace(table_id, std::move(vec));
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IoError, std::string("bad dense index dump: ") + e.what());
    }
    return index;
}

void save_sparse_index(const SparseIndex& index, const std::filesystem::path& path) {
    detail::write_file(path, sparse_index_to_string(index));
}

SparseIndex load_sparse_index(const std::filesystem::path& path) {
    return sparse_index_from_string(detail::read_file(path));
}

void save_dense_index(const DenseIndex& index, const std::filesystem::path& path) {
    detail::write_file(path, dense_index_to_string(index));
}

DenseIndex load_dense_index(const std::filesystem::path& path) {
    return dense_index_from_string(detail::read_file(path));
}

} // namespace rear
