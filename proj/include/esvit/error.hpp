#pragma once

#include <stdexcept>
#include <string>

namespace esvit {

// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInvalidArgument,  // precondition violated by a caller
  kInvalidConfig,    // configuration document rejected
  kMissingInput,     // a file or directory does not exist
  kParse,            // malformed file contents
  kOutOfRange,       // a value outside its declared domain
  kIo,               // read/write failure on an existing path
  kInvariant,        // internal invariant tripped (non-finite values, shape bugs)
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorKind::kInvalidArgument, message);
}

}  // namespace esvit
