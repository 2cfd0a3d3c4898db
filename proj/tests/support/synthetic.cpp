#include "support/synthetic.hpp"

#include "rear/errors.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <string>

namespace fixtures {
namespace {

std::string pad2(std::size_t n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02zu", n);
    return buf;
}

std::string pad3(std::size_t n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03zu", n);
    return buf;
}

constexpr std::size_t kTopics = 80;
constexpr std::size_t kDistractors = 40;
constexpr std::size_t kKeyValues = 20;
constexpr std::size_t kDataValues = 10;

std::vector<std::string> key_values(std::size_t topic) {
    std::vector<std::string> values;
    values.reserve(kKeyValues);
    for (std::size_t i = 0; i < kKeyValues; ++i) {
        values.push_back("key" + pad2(topic) + "v" + pad3(i));
    }
    return values;
}

std::vector<std::string> data_values(const std::string& prefix, std::size_t count) {
    std::vector<std::string> values;
    values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        values.push_back(prefix + pad3(i));
    }
    return values;
}

rear::ColumnRecord column(const std::string& table_id, std::string name,
                          std::vector<std::string> values) {
    rear::ColumnRecord col;
    col.table_id = table_id;
    col.name = std::move(name);
    col.values = std::move(values);
    return col;
}

std::string topic_tokens(std::size_t topic) {
    const std::string stem = "topic" + pad2(topic);
    return stem + "a " + stem + "b " + stem + "c " + stem + "d";
}

} // namespace

PlantedCorpus make_planted_corpus() {
    PlantedCorpus out;
    auto add = [&](rear::TableRecord table) {
        out.corpus.tables.emplace(table.table_id, std::move(table));
    };

    // Distractors: glued to every query through the shared description tokens,
    // lexically disjoint from everything else.
    for (std::size_t j = 0; j < kDistractors; ++j) {
        const std::string id = "d" + pad2(j);
        rear::TableRecord table;
        table.table_id = id;
        table.title = id + "log " + id + "tab";
        table.description = "gluea glueb";
        table.columns.push_back(column(id, id + "cola", data_values(id + "v", kDataValues)));
        table.columns.push_back(column(id, id + "colb", data_values(id + "w", kDataValues)));
        table.row_count = static_cast<std::int64_t>(kDataValues);
        add(std::move(table));
    }

    // One visible/hidden gold pair per topic, tied together by an identical
    // key column (same name, same values).
    for (std::size_t a = 0; a < kTopics; ++a) {
        const std::string vid = "v" + pad2(a);
        const std::string hid = "h" + pad2(a);
        const std::string key_name = "joinkey" + pad2(a);

        rear::TableRecord visible;
        visible.table_id = vid;
        visible.title = vid + "cat " + vid + "tab";
        visible.description = topic_tokens(a);
        visible.columns.push_back(column(vid, key_name, key_values(a)));
        visible.columns.push_back(column(vid, vid + "cola", data_values(vid + "d", kDataValues)));
        visible.row_count = static_cast<std::int64_t>(kKeyValues);
        add(std::move(visible));

        rear::TableRecord hidden;
        hidden.table_id = hid;
        hidden.title = hid + "led " + hid + "tab";
        hidden.description = "gluea";
        hidden.columns.push_back(column(hid, key_name, key_values(a)));
        hidden.columns.push_back(column(hid, hid + "cola", data_values(hid + "d", kDataValues)));
        hidden.row_count = static_cast<std::int64_t>(kKeyValues);
        add(std::move(hidden));
    }

    // 80 two-gold queries (one topic each), then 20 three-gold queries
    // (two topics, one hidden table).
    for (std::size_t a = 0; a < kTopics; ++a) {
        rear::QueryRecord query;
        query.query_id = "q" + pad3(a);
        query.text = topic_tokens(a) + " gluea glueb";
        query.gold_tables = {"h" + pad2(a), "v" + pad2(a)};
        out.queries.push_back(std::move(query));
    }
    for (std::size_t i = 0; i < 20; ++i) {
        const std::size_t a = i;
        const std::size_t b = i + 40;
        rear::QueryRecord query;
        query.query_id = "q" + pad3(kTopics + i);
        query.text = topic_tokens(a) + " " + topic_tokens(b) + " gluea glueb";
        query.gold_tables = {"h" + pad2(a), "v" + pad2(a), "v" + pad2(b)};
        out.queries.push_back(std::move(query));
    }
    return out;
}

rear::Corpus make_random_corpus(const RandomCorpusParams& params) {
    std::mt19937_64 rng(params.seed);
    auto pick = [&](std::size_t bound) {
        return static_cast<std::size_t>(rng() % bound);
    };
    auto word = [&](std::size_t pool) { return "w" + pad3(pick(pool)); };

    rear::Corpus corpus;
    for (std::size_t t = 0; t < params.tables; ++t) {
        rear::TableRecord table;
        table.table_id = "t" + pad3(t);
        table.title = word(60) + " " + word(60);
        if (pick(3) != 0) {
            table.description = word(120) + " " + word(120) + " " + word(120);
        }

        const std::size_t n_cols = 1 + pick(params.max_columns);
        std::set<std::string> used_names;
        for (std::size_t c = 0; c < n_cols; ++c) {
            // A small name pool makes cross-table name collisions (and thus
            // joinable columns) common.
            std::string name = "c" + pad2(pick(18));
            if (!used_names.insert(name).second) {
                continue;
            }
            rear::ColumnRecord col;
            col.table_id = table.table_id;
            col.name = std::move(name);
            const std::size_t n_vals = pick(params.max_values + 1);
            for (std::size_t v = 0; v < n_vals; ++v) {
                col.values.push_back(word(150));
            }
            table.columns.push_back(std::move(col));
        }
        if (table.columns.empty()) {
            rear::ColumnRecord col;
            col.table_id = table.table_id;
            col.name = "c99";
            col.values.push_back(word(150));
            table.columns.push_back(std::move(col));
        }

        std::size_t longest = 0;
        for (const auto& col : table.columns) {
            longest = std::max(longest, col.values.size());
        }
        table.row_count = static_cast<std::int64_t>(longest);
        corpus.tables.emplace(table.table_id, std::move(table));
    }
    return corpus;
}

std::vector<rear::QueryRecord> make_random_queries(const rear::Corpus& corpus, std::size_t count,
                                                   std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t bound) {
        return static_cast<std::size_t>(rng() % bound);
    };
    const std::vector<std::string> ids = corpus.table_ids();

    std::vector<rear::QueryRecord> queries;
    queries.reserve(count);
    for (std::size_t q = 0; q < count; ++q) {
        rear::QueryRecord query;
        query.query_id = "q" + pad3(q);

        std::set<std::string> gold;
        const std::size_t n_gold = 1 + pick(3);
        while (gold.size() < std::min(n_gold, ids.size())) {
            gold.insert(ids[pick(ids.size())]);
        }
        query.gold_tables.assign(gold.begin(), gold.end());

        std::string text;
        for (const auto& table_id : query.gold_tables) {
            const auto& table = corpus.require(table_id);
            text += table.title;
            text.push_back(' ');
            if (!table.columns.empty()) {
                const auto& col = table.columns[pick(table.columns.size())];
                text += col.name;
                if (!col.values.empty()) {
                    text.push_back(' ');
                    text += col.values[pick(col.values.size())];
                }
            }
            text.push_back(' ');
        }
        text += "w" + pad3(pick(150));
        query.text = std::move(text);
        queries.push_back(std::move(query));
    }
    return queries;
}

void write_corpus_jsonl(const rear::Corpus& corpus, const std::filesystem::path& path) {
    if (!path.parent_path().empty()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw rear::Error(rear::ErrorCode::IoError, "cannot write " + path.string());
    }
    for (const auto& [id, table] : corpus.tables) {
        out << rear::table_record_to_json(table) << '\n';
    }
}

void write_queries_jsonl(const std::vector<rear::QueryRecord>& queries,
                         const std::filesystem::path& path) {
    if (!path.parent_path().empty()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw rear::Error(rear::ErrorCode::IoError, "cannot write " + path.string());
    }
    for (const auto& query : queries) {
        out << rear::query_record_to_json(query) << '\n';
    }
}

} // namespace fixtures
