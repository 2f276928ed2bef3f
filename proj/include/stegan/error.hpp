#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stegan {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NonFinite,
  Divergence,
  Io,
  BadMagic,
  UnsupportedVersion,
  ChecksumMismatch,
  Malformed,
  SchemeMismatch,
  DuplicateKey,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace stegan
