#include "narx/error.hpp"

namespace narx {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kSpecification: return "specification";
    case ErrorKind::kInsufficientData: return "insufficient_data";
    case ErrorKind::kDegenerateOutput: return "degenerate_output";
    case ErrorKind::kInstability: return "instability";
    case ErrorKind::kBudget: return "budget";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kSpecification:
    case ErrorKind::kSchema:
    case ErrorKind::kIo:
      return 2;
    case ErrorKind::kBudget:
      return 4;
    default:
      return 3;
  }
}

}  // namespace narx
