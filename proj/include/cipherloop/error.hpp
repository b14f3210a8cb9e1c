#pragma once

#include <stdexcept>
#include <string>

namespace cipherloop {

enum class ErrorCode {
  InvalidArgument,
  NotInvertible,
  MessageOutOfRange,
  KeyMismatch,
  DepthExceeded,
  LabelMismatch,
  Overflow,
  ProtocolOrderViolation,
  BitWidthMismatch,
  BlindingOverflow,
  BudgetExceeded,
  ConfigInvalid,
  NonPsd,
  DimensionMismatch,
  ParseError,
  TransportError,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cipherloop
