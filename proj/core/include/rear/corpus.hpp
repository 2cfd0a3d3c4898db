#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rear {

struct ColumnRecord {
    std::string name;
    std::vector<std::string> values; // null cells are dropped at ingest; source order kept
    std::string table_id;
};

struct TableRecord {
    std::string table_id;
    std::string title;
    std::vector<ColumnRecord> columns;
    std::int64_t row_count = 0;
    std::optional<std::string> description;

    const ColumnRecord* find_column(std::string_view name) const;
};

struct ManifestEntry {
    std::string path;
    std::string checksum;
};

/// Immutable after ingest; safe for concurrent reads.
struct Corpus {
    std::map<std::string, TableRecord> tables;
    std::vector<ManifestEntry> source_manifest;

    bool contains(const std::string& table_id) const { return tables.count(table_id) != 0; }

    /// Throws Error(UnknownTable) when the id is absent.
    const TableRecord& require(const std::string& table_id) const;

    std::vector<std::string> table_ids() const;
    std::size_t size() const { return tables.size(); }
};

struct QueryRecord {
    std::string query_id;
    std::string text;
    std::vector<std::string> gold_tables; // sorted, unique
};

/// Reads a line-delimited corpus file (one JSON table record per line).
/// Throws Error(MalformedRecord) with a 1-based line number, Error(DuplicateTableId),
/// or Error(EmptyCorpus).
Corpus ingest_corpus(const std::filesystem::path& path);

/// Parses one corpus line; exposed for format tests. `line_no` is used in diagnostics.
TableRecord parse_table_record(std::string_view line, std::size_t line_no);

/// Reads a line-delimited query file and validates gold ids against the corpus.
/// Unknown gold ids fail here, not at scoring time.
std::vector<QueryRecord> load_queries(const std::filesystem::path& path, const Corpus& corpus);

/// Deterministic retrieval text: title, column names, up to row_limit rows of
/// cell values, then the description when present.
std::string serialize_table(const TableRecord& table, std::size_t row_limit);

/// DeepJoin-style column text: "<title>.<name>" followed by up to value_limit
/// distinct values in first-occurrence order, capped at a 512-character budget.
std::string serialize_column(const TableRecord& table, const ColumnRecord& column,
                             std::size_t value_limit);

inline constexpr std::size_t kDefaultRowLimit = 5;
inline constexpr std::size_t kDefaultValueLimit = 30;
inline constexpr std::size_t kColumnTextBudget = 512;

/// Serializes records back to the line-delimited corpus format (used by
/// generators and round-trip tests).
std::string table_record_to_json(const TableRecord& table);
std::string query_record_to_json(const QueryRecord& query);

struct CorpusStats {
    std::size_t total_tables = 0;
    double avg_columns = 0.0;
    double avg_rows = 0.0;
};

CorpusStats corpus_stats(const Corpus& corpus);

} // namespace rear
