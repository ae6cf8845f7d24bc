#pragma once

#include <stdexcept>
#include <string>

namespace pmspde {

// Error categories surface through the C API as status codes and through the
// CLI as process exit codes.
enum class ErrorKind {
  invalid_argument = 1,
  io = 2,
  schema = 3,
  numerical = 4,
  internal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_argument(const std::string& what) {
  return Error(ErrorKind::invalid_argument, what);
}
inline Error io_error(const std::string& what) { return Error(ErrorKind::io, what); }
inline Error schema_error(const std::string& what) {
  return Error(ErrorKind::schema, what);
}
inline Error numerical_error(const std::string& what) {
  return Error(ErrorKind::numerical, what);
}

}  // namespace pmspde
