#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biopsym {

enum class Errc {
  invalid_argument,
  invariant_violation,
  degenerate_geometry,
  out_of_bounds,
  malformed_header,
  truncated_payload,
  parse_error,
  io_failure,
  not_found,
  unknown_reference,
  corrupt_record,
};

std::string_view to_string(Errc code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Input validation failure naming the offending field (maps to HTTP 422).
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(Errc::invalid_argument, what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace biopsym
