#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coopscene {

/// Failure categories surfaced by the library. Every thrown coopscene::Error
/// carries exactly one of these.
enum class Errc {
  malformed_file,
  invariant_violation,
  missing_frame,
  io_failure,
  non_watertight_mesh,
  degenerate_triangle,
  degenerate_input,
  no_road_found,
  invalid_location,
  invalid_target_pose,
  unknown_object,
  invalid_parameter,
  protocol_violation,
  process_failure,
  timeout,
  dimension_mismatch,
  empty_cloud,
  invalid_spec,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace coopscene
