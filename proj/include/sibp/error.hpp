#pragma once

#include <stdexcept>
#include <string>

namespace sibp {

enum class ErrorCode {
  invalid_argument,
  empty_dataset,
  dimension_mismatch,
  edge_out_of_range,
  vocab_mismatch,
  format,
  io,
};

// Single exception type for the library; `code()` distinguishes the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace sibp
