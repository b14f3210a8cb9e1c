#include "cipherloop/error.hpp"

namespace cipherloop {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotInvertible: return "NotInvertible";
    case ErrorCode::MessageOutOfRange: return "MessageOutOfRange";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::DepthExceeded: return "DepthExceeded";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::ProtocolOrderViolation: return "ProtocolOrderViolation";
    case ErrorCode::BitWidthMismatch: return "BitWidthMismatch";
    case ErrorCode::BlindingOverflow: return "BlindingOverflow";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::NonPsd: return "NonPsd";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::TransportError: return "TransportError";
  }
  return "Unknown";
}

}  // namespace cipherloop
