#pragma once

#include <stdexcept>
#include <string>

namespace trslab {

enum class ErrorCode {
  kInvalidInput,
  kBackendUnavailable,
  kDegenerateCondition,
  kNotRecorded,
  kUsage,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool ok, const std::string& what, ErrorCode code = ErrorCode::kInvalidInput) {
  if (!ok) throw Error(code, what);
}

}  // namespace trslab
