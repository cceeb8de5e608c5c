#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tokforge {

enum class ErrorCode {
  InvalidArgument,
  Io,
  Format,
  UnsupportedModel,
  InconsistentModel,
  UnknownAtom,
  UnknownId,
  TargetTooSmall,
  Exhausted,
  EmptyCorpus,
  DegenerateDistribution,
  EmptySet,
  UntokenizableNewToken,
  DimMismatch,
  NotALeaf,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tokforge
