#pragma once

#include <stdexcept>
#include <string>

namespace rear {

enum class ErrorCode {
    MalformedRecord,
    DuplicateTableId,
    EmptyCorpus,
    ColumnNotInTable,
    ProviderUnavailable,
    DimensionMismatch,
    UnknownTable,
    SameTable,
    NoNeighbors,
    EmptyGold,
    EmptyRetrieved,
    NoQueries,
    MissingCandidates,
    ConfigError,
    IoError,
};

const char* to_string(ErrorCode code) noexcept;

/// Process exit status for a failure category: 1 usage/config, 2 data, 3 provider.
int exit_status(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace rear
