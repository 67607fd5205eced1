#pragma once

#include <stdexcept>
#include <string>

namespace pb {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
  config,   // 2
  data,     // 3
  numeric,  // 4
  shape,    // programming error: mismatched tensors
  state,    // API misuse (double backward, wrong model mode)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Machine-readable identifier, e.g. "unknown_generator".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

inline Error config_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::config, std::move(code), msg);
}
inline Error data_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::data, std::move(code), msg);
}
inline Error numeric_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::numeric, std::move(code), msg);
}
inline Error shape_error(const std::string& msg) {
  return Error(ErrorKind::shape, "shape_mismatch", msg);
}
inline Error state_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::state, std::move(code), msg);
}

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numeric: return 4;
    case ErrorKind::shape:
    case ErrorKind::state: return 2;
  }
  return 1;
}

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::shape: return "shape";
    case ErrorKind::state: return "state";
  }
  return "unknown";
}

}  // namespace pb
