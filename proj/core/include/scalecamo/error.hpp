#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scalecamo {

enum class ErrorCode {
  invalid_argument,
  unsupported_algorithm,
  upscale_requested,
  downscale_requested,
  dimension_mismatch,
  infeasible,
  placement_out_of_bounds,
  degenerate_pair,
  insufficient_candidates,
  all_scenes_empty,
  annotation_content_mismatch,
  image_too_small,
  empty_corpus,
  policy_range_invalid,
  io_failure,
  parse_failure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the toolkit; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// True when the error is a property of the inputs (the attack or dataset
/// cannot be built as asked) rather than of the environment.
bool is_domain_failure(ErrorCode code) noexcept;

}  // namespace scalecamo
