#pragma once

#include <stdexcept>
#include <string>

namespace sharpseg {

enum class ErrorCode {
  ShapeMismatch,
  InvalidAttr,
  NumericDomain,
  NotScalar,
  DetachedNode,
  NonFinite,
  DimMismatch,
  Overflow,
  InvalidConfig,
  ArityMismatch,
  DomainError,
  EmptyDataset,
  EmptyGTSurface,
  CorruptHeader,
  TruncatedPayload,
  VersionMismatch,
  Io,
};

const char* error_name(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (tests, the CLI's exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace sharpseg
