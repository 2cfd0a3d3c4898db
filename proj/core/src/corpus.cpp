#include "rear/corpus.hpp"

#include "rear/errors.hpp"
#include "rear/text.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace rear {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const ColumnRecord* TableRecord::find_column(std::string_view name) const {
    for (const auto& column : columns) {
        if (column.name == name) {
            return &column;
        }
    }
    return nullptr;
}

const TableRecord& Corpus::require(const std::string& table_id) const {
    auto it = tables.find(table_id);
    if (it == tables.end()) {
        throw Error(ErrorCode::UnknownTable, "no table with id '" + table_id + "'");
    }
    return it->second;
}

std::vector<std::string> Corpus::table_ids() const {
    std::vector<std::string> ids;
    ids.reserve(tables.size());
    for (const auto& [id, table] : tables) {
        ids.push_back(id);
    }
    return ids;
}

namespace {

[[noreturn]] void malformed(std::size_t line_no, const std::string& reason) {
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(line_no) + ": " + reason);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

TableRecord parse_table_record(std::string_view line, std::size_t line_no) {
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded()) {
        malformed(line_no, "invalid JSON");
    }
    if (!record.is_object()) {
        malformed(line_no, "record is not an object");
    }

    TableRecord table;
    if (!record.contains("table_id") || !record["table_id"].is_string()) {
        malformed(line_no, "missing string field 'table_id'");
    }
    table.table_id = record["table_id"].get<std::string>();
    if (table.table_id.empty()) {
        malformed(line_no, "'table_id' is empty");
    }

    if (!record.contains("title") || !record["title"].is_string()) {
        malformed(line_no, "missing string field 'title'");
    }
    table.title = record["title"].get<std::string>();

    if (!record.contains("columns") || !record["columns"].is_array()) {
        malformed(line_no, "missing array field 'columns'");
    }
    std::set<std::string> seen_names;
    for (const auto& col : record["columns"]) {
        if (!col.is_object() || !col.contains("name") || !col["name"].is_string()) {
            malformed(line_no, "column entry without a string 'name'");
        }
        ColumnRecord column;
        column.name = col["name"].get<std::string>();
        column.table_id = table.table_id;
        if (column.name.empty()) {
            malformed(line_no, "column name is empty");
        }
        if (!seen_names.insert(column.name).second) {
            malformed(line_no, "duplicate column name '" + column.name + "'");
        }
        if (col.contains("values")) {
            if (!col["values"].is_array()) {
                malformed(line_no, "column 'values' is not an array");
            }
            for (const auto& value : col["values"]) {
                if (value.is_null()) {
                    continue; // null cells carry no join signal
                }
                if (!value.is_string()) {
                    malformed(line_no, "column values must be strings or null");
                }
                column.values.push_back(value.get<std::string>());
            }
        }
        table.columns.push_back(std::move(column));
    }

    if (record.contains("row_count")) {
        if (!record["row_count"].is_number_integer() ||
            record["row_count"].get<std::int64_t>() < 0) {
            malformed(line_no, "'row_count' must be a non-negative integer");
        }
        table.row_count = record["row_count"].get<std::int64_t>();
    }

    if (record.contains("description") && !record["description"].is_null()) {
        if (!record["description"].is_string()) {
            malformed(line_no, "'description' must be a string");
        }
        table.description = record["description"].get<std::string>();
    }
    return table;
}

Corpus ingest_corpus(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::IoError, "corpus file not found: " + path.string());
    }
    std::string contents = read_file(path);

    Corpus corpus;
    corpus.source_manifest.push_back({path.string(), content_digest(contents)});

    std::istringstream stream(contents);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        TableRecord table = parse_table_record(line, line_no);
        auto [it, inserted] = corpus.tables.emplace(table.table_id, std::move(table));
        if (!inserted) {
            throw Error(ErrorCode::DuplicateTableId,
                        "table_id '" + it->first + "' appears more than once (line " +
                            std::to_string(line_no) + ")");
        }
    }
    if (corpus.tables.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "no table records in " + path.string());
    }
    return corpus;
}

std::vector<QueryRecord> load_queries(const std::filesystem::path& path, const Corpus& corpus) {
    std::string contents = read_file(path);
    std::istringstream stream(contents);
    std::string line;
    std::size_t line_no = 0;
    std::vector<QueryRecord> queries;
    std::set<std::string> seen_ids;
    while (std::getline(stream, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            malformed(line_no, "invalid query record");
        }
        QueryRecord query;
        if (!record.contains("query_id") || !record["query_id"].is_string()) {
            malformed(line_no, "missing string field 'query_id'");
        }
        query.query_id = record["query_id"].get<std::string>();
        if (!seen_ids.insert(query.query_id).second) {
            malformed(line_no, "duplicate query_id '" + query.query_id + "'");
        }
        if (!record.contains("text") || !record["text"].is_string()) {
            malformed(line_no, "missing string field 'text'");
        }
        query.text = record["text"].get<std::string>();
        if (!record.contains("gold_tables") || !record["gold_tables"].is_array()) {
            malformed(line_no, "missing array field 'gold_tables'");
        }
        std::set<std::string> gold;
        for (const auto& id : record["gold_tables"]) {
            if (!id.is_string()) {
                malformed(line_no, "gold table ids must be strings");
            }
            const std::string table_id = id.get<std::string>();
            if (!corpus.contains(table_id)) {
                malformed(line_no, "gold table '" + table_id + "' is not in the corpus");
            }
            gold.insert(table_id);
        }
        query.gold_tables.assign(gold.begin(), gold.end());
        queries.push_back(std::move(query));
    }
    return queries;
}

std::string serialize_table(const TableRecord& table, std::size_t row_limit) {
    std::string out = table.title;
    out.push_back('\n');
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i > 0) {
            out.push_back(' ');
        }
        out += table.columns[i].name;
    }
    std::size_t longest = 0;
    for (const auto& column : table.columns) {
        longest = std::max(longest, column.values.size());
    }
    const std::size_t rows = std::min(row_limit, longest);
    for (std::size_t row = 0; row < rows; ++row) {
        out.push_back('\n');
        bool first = true;
        for (const auto& column : table.columns) {
            if (row >= column.values.size()) {
                continue;
            }
            if (!first) {
                out.push_back(' ');
            }
            out += column.values[row];
            first = false;
        }
    }
    if (table.description) {
        out.push_back('\n');
        out += *table.description;
    }
    return out;
}

std::string serialize_column(const TableRecord& table, const ColumnRecord& column,
                             std::size_t value_limit) {
    if (column.table_id != table.table_id || table.find_column(column.name) == nullptr) {
        throw Error(ErrorCode::ColumnNotInTable,
                    "column '" + column.name + "' does not belong to table '" +
                        table.table_id + "'");
    }
    std::string out = table.title + "." + column.name;
    std::set<std::string_view> seen;
    std::size_t emitted = 0;
    for (const auto& value : column.values) {
        if (emitted >= value_limit) {
            break;
        }
        if (!seen.insert(value).second) {
            continue; // keep first occurrence only
        }
        if (out.size() + 1 + value.size() > kColumnTextBudget) {
            break;
        }
        out.push_back(' ');
        out += value;
        ++emitted;
    }
    return out;
}

std::string table_record_to_json(const TableRecord& table) {
    ordered_json record;
    record["table_id"] = table.table_id;
    record["title"] = table.title;
    ordered_json columns = ordered_json::array();
    for (const auto& column : table.columns) {
        ordered_json col;
        col["name"] = column.name;
        col["values"] = column.values;
        columns.push_back(std::move(col));
    }
    record["columns"] = std::move(columns);
    record["row_count"] = table.row_count;
    if (table.description) {
        record["description"] = *table.description;
    }
    return record.dump();
}

std::string query_record_to_json(const QueryRecord& query) {
    ordered_json record;
    record["query_id"] = query.query_id;
    record["text"] = query.text;
    record["gold_tables"] = query.gold_tables;
    return record.dump();
}

CorpusStats corpus_stats(const Corpus& corpus) {
    CorpusStats stats;
    stats.total_tables = corpus.tables.size();
    if (stats.total_tables == 0) {
        return stats;
    }
    double columns = 0.0;
    double rows = 0.0;
    for (const auto& [id, table] : corpus.tables) {
        columns += static_cast<double>(table.columns.size());
        rows += static_cast<double>(table.row_count);
    }
    stats.avg_columns = columns / static_cast<double>(stats.total_tables);
    stats.avg_rows = rows / static_cast<double>(stats.total_tables);
    return stats;
}

} // namespace rear
