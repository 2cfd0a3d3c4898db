#include "rear/join.hpp"

#include "rear/errors.hpp"

#include "io_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>
#include <tuple>

namespace rear {
namespace {

using ordered_json = nlohmann::ordered_json;

bool better_neighbor(const ColumnNeighbor& a, const ColumnNeighbor& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.id < b.id;
}

} // namespace

AnnMode parse_ann_mode(const std::string& name) {
    if (name == "auto") return AnnMode::Auto;
    if (name == "ann") return AnnMode::ForceAnn;
    if (name == "exact") return AnnMode::ForceExact;
    throw Error(ErrorCode::ConfigError, "unknown ann mode: " + name);
}

const char* to_string(AnnMode mode) {
    switch (mode) {
    case AnnMode::Auto: return "auto";
    case AnnMode::ForceAnn: return "ann";
    case AnnMode::ForceExact: return "exact";
    }
    return "?";
}

const std::vector<std::uint32_t>& ColumnIndex::table_columns(const std::string& table_id) const {
    auto it = by_table.find(table_id);
    if (it == by_table.end()) throw Error(ErrorCode::UnknownTable, table_id);
    return it->second;
}

std::vector<ColumnNeighbor> ColumnIndex::neighbors(std::uint32_t id, std::size_t m) const {
    const auto& probe = entries.at(id).vec;
    std::vector<ColumnNeighbor> hits;
    if (uses_ann) {
        for (const auto& hit : ann.search(probe, m + 1)) {
            if (hit.id == id) continue;
            hits.push_back({hit.id, hit.sim});
        }
        if (hits.size() > m) hits.resize(m);
        return hits;
    }
    hits.reserve(entries.size());
    for (std::uint32_t other = 0; other < entries.size(); ++other) {
        if (other == id) continue;
        hits.push_back({other, cosine(probe, entries[other].vec)});
    }
    const std::size_t keep = std::min(m, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep),
                      hits.end(), better_neighbor);
    hits.resize(keep);
    return hits;
}

std::vector<ColumnNeighbor> ColumnIndex::neighbors(const EmbeddingVector& probe,
                                                   std::size_t m) const {
    std::vector<ColumnNeighbor> hits;
    if (uses_ann) {
        for (const auto& hit : ann.search(probe, m)) hits.push_back({hit.id, hit.sim});
        return hits;
    }
    hits.reserve(entries.size());
    for (std::uint32_t other = 0; other < entries.size(); ++other) {
        hits.push_back({other, cosine(probe, entries[other].vec)});
    }
    const std::size_t keep = std::min(m, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep),
                      hits.end(), better_neighbor);
    hits.resize(keep);
    return hits;
}

ColumnIndex build_column_index(const Corpus& corpus, EmbeddingProvider& embedder,
                               std::size_t value_limit, AnnMode mode, HnswParams ann_params) {
    ColumnIndex index;
    index.embedder_id = embedder.id();
    index.value_limit = value_limit;
    std::vector<std::string> texts;
    for (const auto& [table_id, table] : corpus.tables) {
        index.by_table[table_id]; // tables without columns still resolve
        for (const auto& column : table.columns) {
            index.by_table[table_id].push_back(static_cast<std::uint32_t>(index.entries.size()));
            index.entries.push_back({table_id, column.name, {}});
            texts.push_back(serialize_column(table, column, value_limit));
        }
    }
    if (!texts.empty()) {
        auto vectors = embedder.embed_batch(texts);
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            index.entries[i].vec = std::move(vectors[i]);
        }
    }
    index.uses_ann = mode == AnnMode::ForceAnn ||
                     (mode == AnnMode::Auto && index.entries.size() >= kAnnThreshold);
    if (index.uses_ann) {
        index.ann = HnswIndex(ann_params);
        for (std::uint32_t id = 0; id < index.entries.size(); ++id) {
            index.ann.add(id, index.entries[id].vec);
        }
    }
    return index;
}

double joinable_pair(const ColumnIndex& index, const std::string& table_a,
                     const std::string& table_b) {
    if (table_a == table_b) throw Error(ErrorCode::SameTable, table_a);
    const auto& cols_a = index.table_columns(table_a);
    const auto& cols_b = index.table_columns(table_b);
    double best = 0.0;
    for (std::uint32_t a : cols_a) {
        for (std::uint32_t b : cols_b) {
            best = std::max(best, cosine(index.entries[a].vec, index.entries[b].vec));
        }
    }
    return best;
}

std::vector<JoinCandidate> expand_candidates(const ColumnIndex& index,
                                             const std::vector<std::string>& base_tables,
                                             double tau, std::size_t m) {
    std::set<std::string> base_set(base_tables.begin(), base_tables.end());
    std::map<std::string, JoinCandidate> best;
    for (const auto& base : base_set) {
        for (std::uint32_t col : index.table_columns(base)) {
            for (const auto& hit : index.neighbors(col, m)) {
                if (hit.sim < tau) continue;
                const auto& peer = index.entries[hit.id];
                if (base_set.count(peer.table_id)) continue;
                JoinCandidate edge{peer.table_id, base, index.entries[col].column, peer.column,
                                   hit.sim};
                auto it = best.find(peer.table_id);
                if (it == best.end()) {
                    best.emplace(peer.table_id, std::move(edge));
                    continue;
                }
                auto& cur = it->second;
                const auto key = std::tie(edge.base_table, edge.base_column, edge.joined_column);
                const auto cur_key =
                    std::tie(cur.base_table, cur.base_column, cur.joined_column);
                if (edge.sim > cur.sim || (edge.sim == cur.sim && key < cur_key)) {
                    cur = std::move(edge);
                }
            }
        }
    }
    std::vector<JoinCandidate> out;
    out.reserve(best.size());
    for (auto& [table_id, edge] : best) {
        (void)table_id;
        out.push_back(std::move(edge));
    }
    std::sort(out.begin(), out.end(), [](const JoinCandidate& a, const JoinCandidate& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.table_id < b.table_id;
    });
    return out;
}

std::vector<JoinEdge> all_join_edges(const ColumnIndex& index, double tau, std::size_t m) {
    std::map<std::tuple<std::string, std::string, std::string, std::string>, double> found;
    for (std::uint32_t id = 0; id < index.entries.size(); ++id) {
        const auto& self = index.entries[id];
        for (const auto& hit : index.neighbors(id, m)) {
            if (hit.sim < tau) continue;
            const auto& peer = index.entries[hit.id];
            if (peer.table_id == self.table_id) continue;
            auto key = std::make_pair(self.table_id, self.column) <
                               std::make_pair(peer.table_id, peer.column)
                           ? std::make_tuple(self.table_id, self.column, peer.table_id,
                                             peer.column)
                           : std::make_tuple(peer.table_id, peer.column, self.table_id,
                                             self.column);
            auto [it, inserted] = found.emplace(std::move(key), hit.sim);
            if (!inserted) it->second = std::max(it->second, hit.sim);
        }
    }
    std::vector<JoinEdge> edges;
    edges.reserve(found.size());
    for (const auto& [key, sim] : found) {
        edges.push_back(
            {std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key), sim});
    }
    return edges;
}

std::string column_index_to_string(const ColumnIndex& index) {
    ordered_json doc;
    doc["format_version"] = 1;
    doc["kind"] = "columns";
    doc["embedder_id"] = index.embedder_id;
    doc["value_limit"] = index.value_limit;
    const auto& p = index.ann.params();
    doc["ann"] = {{"used", index.uses_ann},
                  {"M", p.M},
                  {"ef_construction", p.ef_construction},
                  {"ef_search", p.ef_search},
                  {"seed", p.seed}};
    ordered_json tables = ordered_json::array();
    for (const auto& [table_id, cols] : index.by_table) {
        (void)cols;
        tables.push_back(table_id);
    }
    doc["tables"] = std::move(tables); // keeps column-less tables resolvable
    ordered_json rows = ordered_json::array();
    for (const auto& entry : index.entries) {
        ordered_json vec = ordered_json::array();
        for (float component : entry.vec.components) {
            vec.push_back(static_cast<double>(component));
        }
        rows.push_back({{"table", entry.table_id}, {"column", entry.column},
                        {"vec", std::move(vec)}});
    }
    doc["entries"] = std::move(rows);
    return doc.dump() + "\n";
}

ColumnIndex column_index_from_string(const std::string& text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IoError, std::string("unparseable index dump: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format_version", 0) != 1 ||
        doc.value("kind", std::string()) != "columns") {
        throw Error(ErrorCode::IoError, "expected a columns index dump");
    }
    ColumnIndex index;
    try {
        index.embedder_id = doc.at("embedder_id").get<std::string>();
        index.value_limit = doc.at("value_limit").get<std::size_t>();
        const auto& ann = doc.at("ann");
        HnswParams params;
        params.M = ann.at("M").get<std::size_t>();
        params.ef_construction = ann.at("ef_construction").get<std::size_t>();
        params.ef_search = ann.at("ef_search").get<std::size_t>();
        params.seed = ann.at("seed").get<std::uint64_t>();
        index.uses_ann = ann.at("used").get<bool>();
        for (const auto& table_id : doc.at("tables")) {
            index.by_table[table_id.get<std::string>()];
        }
        for (const auto& row : doc.at("entries")) {
            ColumnEntry entry;
            entry.table_id = row.at("table").get<std::string>();
            entry.column = row.at("column").get<std::string>();
            for (const auto& component : row.at("vec")) {
                entry.vec.components.push_back(static_cast<float>(component.get<double>()));
            }
            index.by_table[entry.table_id].push_back(
                static_cast<std::uint32_t>(index.entries.size()));
            index.entries.push_back(std::move(entry));
        }
        if (index.uses_ann) {
            index.ann = HnswIndex(params);
            for (std::uint32_t id = 0; id < index.entries.size(); ++id) {
                index.ann.add(id, index.entries[id].vec);
            }
        } else {
            index.ann = HnswIndex(params);
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IoError, std::string("bad columns index dump: ") + e.what());
    }
    return index;
}

void save_column_index(const ColumnIndex& index, const std::filesystem::path& path) {
    detail::write_file(path, column_index_to_string(index));
}

ColumnIndex load_column_index(const std::filesystem::path& path) {
    return column_index_from_string(detail::read_file(path));
}

} // namespace rear
