#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pixground {

enum class ErrorCode {
  invalid_argument,
  malformed_mask,
  dimension_mismatch,
  empty_source,
  unknown_class,
  absent_class,
  out_of_range,
  degenerate_polygon,
  self_intersecting,
  empty_input,
  undefined_correlation,
  schema,
  io,
  decoder,
};

std::string_view error_code_name(ErrorCode code);

/// Single exception type for the library; `code()` lets callers and tests
/// tell failure classes apart without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pixground
