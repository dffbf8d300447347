#include "sharpseg/error.hpp"

namespace sharpseg {

const char* error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidAttr: return "InvalidAttr";
    case ErrorCode::NumericDomain: return "NumericDomain";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::DetachedNode: return "DetachedNode";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyGTSurface: return "EmptyGTSurface";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace sharpseg
