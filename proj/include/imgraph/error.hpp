#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace imgraph {

enum class ErrorCode {
    OutOfRange,
    DimensionMismatch,
    TooLarge,
    DuplicateId,
    NoEdges,
    NotFound,
    CapacityExceeded,
    Undefined,
    KeywordNotFound,
    NoMap,
    AtTopLayer,
    AtBottomLayer,
    FormatError,
    DanglingMetadata,
    EmptyCollection,
    CorruptGraph,
    IoError,
};

/// Stable name used on the wire ({"error": "<name>"}) and in logs.
std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace imgraph
