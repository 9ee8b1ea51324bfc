#include "sgvc/error.hpp"

namespace sgvc {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kLabel: return "label error";
    case ErrorKind::kSchema: return "schema error";
    case ErrorKind::kIntegrity: return "integrity error";
    case ErrorKind::kParameter: return "parameter error";
    case ErrorKind::kEmptyInput: return "empty input";
  }
  return "error";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kParameter:
    case ErrorKind::kSchema:
      return 2;
    case ErrorKind::kData:
    case ErrorKind::kShape:
    case ErrorKind::kLabel:
    case ErrorKind::kEmptyInput:
      return 3;
    case ErrorKind::kNumeric:
      return 4;
    case ErrorKind::kIo:
    case ErrorKind::kIntegrity:
      return 5;
  }
  return 1;
}

}  // namespace sgvc
