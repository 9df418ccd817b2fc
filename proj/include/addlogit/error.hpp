#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace addlogit {

enum class ErrorCode {
  invalid_domain,
  too_few_basis,
  dimension_too_small,
  non_finite_input,
  length_mismatch,
  shape_mismatch,
  one_class_input,
  separation_detected,
  singular_system,
  step_out_of_range,
  invalid_range,
  empty_input,
  degenerate_after_retries,
  class_too_small,
  parse_error,
  unknown_label_value,
  all_rows_dropped,
  all_fits_failed,
  invalid_config,
  io_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_domain: return "invalid-domain";
    case ErrorCode::too_few_basis: return "too-few-basis";
    case ErrorCode::dimension_too_small: return "dimension-too-small";
    case ErrorCode::non_finite_input: return "non-finite-input";
    case ErrorCode::length_mismatch: return "length-mismatch";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::one_class_input: return "one-class-input";
    case ErrorCode::separation_detected: return "separation-detected";
    case ErrorCode::singular_system: return "singular-system";
    case ErrorCode::step_out_of_range: return "step-out-of-range";
    case ErrorCode::invalid_range: return "invalid-range";
    case ErrorCode::empty_input: return "empty-input";
    case ErrorCode::degenerate_after_retries: return "degenerate-after-retries";
    case ErrorCode::class_too_small: return "class-too-small";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::unknown_label_value: return "unknown-label-value";
    case ErrorCode::all_rows_dropped: return "all-rows-dropped";
    case ErrorCode::all_fits_failed: return "all-fits-failed";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// harness can record it per fit instead of dropping the record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace addlogit
