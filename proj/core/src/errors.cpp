#include "rear/errors.hpp"

namespace rear {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedRecord:     return "MalformedRecord";
        case ErrorCode::DuplicateTableId:    return "DuplicateTableId";
        case ErrorCode::EmptyCorpus:         return "EmptyCorpus";
        case ErrorCode::ColumnNotInTable:    return "ColumnNotInTable";
        case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::DimensionMismatch:   return "DimensionMismatch";
        case ErrorCode::UnknownTable:        return "UnknownTable";
        case ErrorCode::SameTable:           return "SameTable";
        case ErrorCode::NoNeighbors:         return "NoNeighbors";
        case ErrorCode::EmptyGold:           return "EmptyGold";
        case ErrorCode::EmptyRetrieved:      return "EmptyRetrieved";
        case ErrorCode::NoQueries:           return "NoQueries";
        case ErrorCode::MissingCandidates:   return "MissingCandidates";
        case ErrorCode::ConfigError:         return "ConfigError";
        case ErrorCode::IoError:             return "IoError";
    }
    return "UnknownError";
}

int exit_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ConfigError:
            return 1;
        case ErrorCode::ProviderUnavailable:
        case ErrorCode::DimensionMismatch:
            return 3;
        default:
            return 2;
    }
}

} // namespace rear
