#pragma once

#include <stdexcept>
#include <string>

namespace qnopt {

enum class ErrorCode {
  InvalidArgument,    // bad sizes, probabilities, levels
  NumericInput,       // NaN / inf in an input vector
  Configuration,      // solver config inconsistent with the problem
  GenerationFailure,  // random construction gave up
  ConvergenceFailure, // iterative solver hit its cap
  Unsupported,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace qnopt
