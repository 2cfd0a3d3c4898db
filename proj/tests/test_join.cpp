#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rear/corpus.hpp"
#include "rear/errors.hpp"
#include "rear/hnsw.hpp"
#include "rear/join.hpp"
#include "rear/providers.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace {

rear::Corpus two_table_corpus() {
    rear::Corpus corpus;
    rear::TableRecord orders;
    orders.table_id = "orders";
    orders.title = "orders";
    orders.columns = {{"customer_id", {"c1", "c2", "c3"}, "orders"},
                      {"total", {"10", "20", "30"}, "orders"}};
    rear::TableRecord customers;
    customers.table_id = "customers";
    customers.title = "customers";
    customers.columns = {{"customer_id", {"c1", "c2", "c3"}, "customers"},
                         {"city", {"oslo", "lima", "pune"}, "customers"}};
    corpus.tables.emplace("orders", orders);
    corpus.tables.emplace("customers", customers);
    return corpus;
}

std::set<std::string> candidate_ids(const std::vector<rear::JoinCandidate>& candidates) {
    std::set<std::string> ids;
    for (const auto& c : candidates) ids.insert(c.table_id);
    return ids;
}

} // namespace

TEST_CASE("hnsw search is deterministic and exact on small sets") {
    std::mt19937_64 rng(17);
    std::vector<rear::EmbeddingVector> vectors;
    for (int i = 0; i < 120; ++i) {
        rear::EmbeddingVector v;
        for (int d = 0; d < 16; ++d) {
            v.components.push_back(static_cast<float>(rng() % 1000) / 1000.0f - 0.5f);
        }
        rear::normalize(v);
        vectors.push_back(std::move(v));
    }

    rear::HnswParams params;
    rear::HnswIndex a(params), b(params);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        a.add(static_cast<std::uint32_t>(i), vectors[i]);
        b.add(static_cast<std::uint32_t>(i), vectors[i]);
    }

    for (std::size_t probe = 0; probe < vectors.size(); probe += 7) {
        const auto ha = a.search(vectors[probe], 10);
        const auto hb = b.search(vectors[probe], 10);
        REQUIRE(ha.size() == hb.size());
        for (std::size_t i = 0; i < ha.size(); ++i) {
            CHECK(ha[i].id == hb[i].id); // same build -> same graph -> same answer
            CHECK(ha[i].sim == hb[i].sim);
        }
        // Results ordered sim desc, id asc; the probe itself comes back first.
        CHECK(ha.front().id == probe);
        CHECK(ha.front().sim == doctest::Approx(1.0));
        for (std::size_t i = 1; i < ha.size(); ++i) {
            const bool ordered = ha[i - 1].sim > ha[i].sim ||
                                 (ha[i - 1].sim == ha[i].sim && ha[i - 1].id < ha[i].id);
            CHECK(ordered);
        }
    }

    SUBCASE("ids must be dense and sequential") {
        rear::HnswIndex c(params);
        c.add(0, vectors[0]);
        CHECK_THROWS_AS(c.add(5, vectors[1]), std::invalid_argument);
    }
}

TEST_CASE("hnsw agrees with a brute-force scan on random data") {
    std::mt19937_64 rng(99);
    std::vector<rear::EmbeddingVector> vectors;
    for (int i = 0; i < 200; ++i) {
        rear::EmbeddingVector v;
        for (int d = 0; d < 12; ++d) {
            v.components.push_back(static_cast<float>(rng() % 2000) / 1000.0f - 1.0f);
        }
        rear::normalize(v);
        vectors.push_back(std::move(v));
    }
    rear::HnswIndex index(rear::HnswParams{});
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        index.add(static_cast<std::uint32_t>(i), vectors[i]);
    }

    std::size_t exact_hits = 0, probes = 0;
    for (std::size_t probe = 0; probe < vectors.size(); probe += 11) {
        const auto hits = index.search(vectors[probe], 5);
        // Brute force with the same comparator.
        std::vector<std::pair<double, std::uint32_t>> all;
        for (std::uint32_t j = 0; j < vectors.size(); ++j) {
            all.push_back({rear::cosine(vectors[probe], vectors[j]), j});
        }
        std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first > y.first;
            return x.second < y.second;
        });
        REQUIRE(hits.size() == 5);
        bool identical = true;
        for (std::size_t i = 0; i < hits.size(); ++i) {
            if (hits[i].id != all[i].second) identical = false;
        }
        exact_hits += identical ? 1 : 0;
        ++probes;
    }
    // ef_search far exceeds k at this scale; expect near-perfect agreement.
    CHECK(exact_hits >= probes - 1);
}

TEST_CASE("column index embeds every column in declared order") {
    const auto corpus = two_table_corpus();
    rear::HashEmbedder embedder(32, 42);
    const auto index = rear::build_column_index(corpus, embedder);

    REQUIRE(index.entries.size() == 4);
    CHECK(index.uses_ann == false); // 4 columns, auto stays exact
    CHECK(index.embedder_id == embedder.id());
    // Corpus iterates tables in id order: customers before orders.
    CHECK(index.entries[0].table_id == "customers");
    CHECK(index.entries[0].column == "customer_id");
    CHECK(index.entries[1].column == "city");
    CHECK(index.table_columns("orders").size() == 2);
    CHECK_THROWS_AS(index.table_columns("zz"), rear::Error);

    SUBCASE("neighbors exclude the probe column") {
        for (std::uint32_t id = 0; id < 4; ++id) {
            for (const auto& hit : index.neighbors(id, 3)) {
                CHECK(hit.id != id);
            }
        }
    }
}

TEST_CASE("joinable_pair is the exact max over column pairs and is symmetric") {
    const auto corpus = two_table_corpus();
    rear::HashEmbedder embedder(32, 42);
    const auto index = rear::build_column_index(corpus, embedder);

    const double sim = rear::joinable_pair(index, "orders", "customers");
    CHECK(sim == rear::joinable_pair(index, "customers", "orders"));

    // Oracle: brute-force max cosine over the 2x2 column grid.
    double best = -2.0;
    for (const auto a : index.table_columns("orders")) {
        for (const auto b : index.table_columns("customers")) {
            best = std::max(best, rear::cosine(index.entry(a).vec, index.entry(b).vec));
        }
    }
    CHECK(sim == doctest::Approx(best).epsilon(1e-12));
    // The shared customer_id column dominates; identical values, same name.
    CHECK(sim > 0.7);

    CHECK_THROWS_AS(rear::joinable_pair(index, "orders", "orders"), rear::Error);
    CHECK_THROWS_AS(rear::joinable_pair(index, "orders", "nope"), rear::Error);
}

TEST_CASE("expand_candidates respects tau, skips base tables, and reports best edges") {
    const auto planted = fixtures::make_planted_corpus();
    rear::HashEmbedder embedder(64, 42);
    const auto index = rear::build_column_index(planted.corpus, embedder);

    SUBCASE("planted joins surface the hidden partner") {
        const auto candidates = rear::expand_candidates(index, {"v07"}, 0.7, 10);
        const auto ids = candidate_ids(candidates);
        CHECK(ids.count("h07") == 1);
        CHECK(ids.count("v07") == 0); // base never reappears
        for (const auto& c : candidates) {
            CHECK(c.sim >= 0.7);
            if (c.table_id == "h07") {
                CHECK(c.base_table == "v07");
                CHECK(c.base_column == "joinkey07");
                CHECK(c.joined_column == "joinkey07");
            }
        }
        // Sorted by sim desc, id asc.
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            const bool ordered =
                candidates[i - 1].sim > candidates[i].sim ||
                (candidates[i - 1].sim == candidates[i].sim &&
                 candidates[i - 1].table_id < candidates[i].table_id);
            CHECK(ordered);
        }
    }
    SUBCASE("tau monotonicity: raising tau never adds candidates") {
        const std::vector<std::string> base{"v03", "v11", "d00"};
        const auto loose = candidate_ids(rear::expand_candidates(index, base, 0.5, 10));
        const auto mid = candidate_ids(rear::expand_candidates(index, base, 0.7, 10));
        const auto tight = candidate_ids(rear::expand_candidates(index, base, 0.95, 10));
        CHECK(std::includes(loose.begin(), loose.end(), mid.begin(), mid.end()));
        CHECK(std::includes(mid.begin(), mid.end(), tight.begin(), tight.end()));
    }
    SUBCASE("tau above every similarity yields nothing") {
        CHECK(rear::expand_candidates(index, {"v07"}, 1.01, 10).empty());
    }
    SUBCASE("unknown base table") {
        CHECK_THROWS_AS(rear::expand_candidates(index, {"zz"}, 0.7, 10), rear::Error);
    }
}

TEST_CASE("ann and exact expansion agree on the planted corpus") {
    const auto planted = fixtures::make_planted_corpus();
    rear::HashEmbedder embedder(64, 42);
    const auto exact =
        rear::build_column_index(planted.corpus, embedder, rear::kDefaultValueLimit,
                                 rear::AnnMode::ForceExact);
    const auto ann = rear::build_column_index(planted.corpus, embedder,
                                              rear::kDefaultValueLimit, rear::AnnMode::ForceAnn);
    CHECK(exact.uses_ann == false);
    CHECK(ann.uses_ann == true);

    for (const std::string base : {"v00", "v19", "v42", "v79"}) {
        const auto from_exact = candidate_ids(rear::expand_candidates(exact, {base}, 0.7, 10));
        const auto from_ann = candidate_ids(rear::expand_candidates(ann, {base}, 0.7, 10));
        CHECK(from_exact == from_ann);
    }
}

TEST_CASE("all_join_edges enumerates canonical deduplicated edges") {
    const auto corpus = two_table_corpus();
    rear::HashEmbedder embedder(32, 42);
    const auto index = rear::build_column_index(corpus, embedder);

    const auto edges = rear::all_join_edges(index, 0.5, 5);
    REQUIRE(!edges.empty());
    for (const auto& edge : edges) {
        CHECK(edge.table_a < edge.table_b); // canonical order, no same-table edges
        CHECK(edge.sim >= 0.5);
    }
    // The customer_id pair must be the strongest edge.
    const auto& top = *std::max_element(edges.begin(), edges.end(),
                                        [](const auto& a, const auto& b) { return a.sim < b.sim; });
    CHECK(top.table_a == "customers");
    CHECK(top.table_b == "orders");
    CHECK(top.column_a == "customer_id");
    CHECK(top.column_b == "customer_id");

    // No duplicates under the canonical key.
    std::set<std::tuple<std::string, std::string, std::string, std::string>> seen;
    for (const auto& edge : edges) {
        CHECK(seen.insert({edge.table_a, edge.column_a, edge.table_b, edge.column_b}).second);
    }
}

TEST_CASE("column index round-trips byte-identically, including column-less tables") {
    auto corpus = two_table_corpus();
    rear::TableRecord bare;
    bare.table_id = "bare";
    bare.title = "no columns here";
    corpus.tables.emplace("bare", bare);

    rear::HashEmbedder embedder(32, 42);

    for (const auto mode : {rear::AnnMode::ForceExact, rear::AnnMode::ForceAnn}) {
        CAPTURE(rear::to_string(mode));
        const auto index =
            rear::build_column_index(corpus, embedder, rear::kDefaultValueLimit, mode);
        const auto dump = rear::column_index_to_string(index);
        const auto reloaded = rear::column_index_from_string(dump);
        CHECK(rear::column_index_to_string(reloaded) == dump);
        CHECK(reloaded.uses_ann == index.uses_ann);
        CHECK(reloaded.embedder_id == index.embedder_id);
        CHECK(reloaded.value_limit == index.value_limit);
        REQUIRE(reloaded.entries.size() == index.entries.size());
        CHECK(reloaded.table_columns("bare").empty()); // survives the round trip

        // Neighbor queries answer identically after reload.
        for (std::uint32_t id = 0; id < index.entries.size(); ++id) {
            const auto a = index.neighbors(id, 3);
            const auto b = reloaded.neighbors(id, 3);
            REQUIRE(a.size() == b.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].id == b[i].id);
                CHECK(a[i].sim == b[i].sim);
            }
        }
    }

    const auto path = std::filesystem::temp_directory_path() / "rear_test_columns.json";
    const auto index = rear::build_column_index(corpus, embedder);
    rear::save_column_index(index, path);
    const auto from_disk = rear::load_column_index(path);
    CHECK(rear::column_index_to_string(from_disk) == rear::column_index_to_string(index));

    CHECK_THROWS_AS(rear::column_index_from_string("{}"), rear::Error);
}

TEST_CASE("ann mode parsing") {
    CHECK(rear::parse_ann_mode("auto") == rear::AnnMode::Auto);
    CHECK(rear::parse_ann_mode("ann") == rear::AnnMode::ForceAnn);
    CHECK(rear::parse_ann_mode("exact") == rear::AnnMode::ForceExact);
    CHECK_THROWS_AS(rear::parse_ann_mode("faiss"), rear::Error);
}
