#include "esvit/error.hpp"

namespace esvit {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kInvalidConfig: return "invalid config";
    case ErrorKind::kMissingInput: return "missing input";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kOutOfRange: return "out of range";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kInvariant: return "invariant violated";
  }
  return "unknown";
}

}  // namespace esvit
