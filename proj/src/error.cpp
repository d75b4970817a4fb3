#include "imgraph/error.hpp"

namespace imgraph {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::NoEdges: return "NoEdges";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::CapacityExceeded: return "CapacityExceeded";
        case ErrorCode::Undefined: return "Undefined";
        case ErrorCode::KeywordNotFound: return "KeywordNotFound";
        case ErrorCode::NoMap: return "NoMap";
        case ErrorCode::AtTopLayer: return "AtTopLayer";
        case ErrorCode::AtBottomLayer: return "AtBottomLayer";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::DanglingMetadata: return "DanglingMetadata";
        case ErrorCode::EmptyCollection: return "EmptyCollection";
        case ErrorCode::CorruptGraph: return "CorruptGraph";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace imgraph
