#include "coopscene/error.hpp"

namespace coopscene {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::malformed_file: return "malformed-file";
    case Errc::invariant_violation: return "invariant-violation";
    case Errc::missing_frame: return "missing-frame";
    case Errc::io_failure: return "io-failure";
    case Errc::non_watertight_mesh: return "non-watertight-mesh";
    case Errc::degenerate_triangle: return "degenerate-triangle";
    case Errc::degenerate_input: return "degenerate-input";
    case Errc::no_road_found: return "no-road-found";
    case Errc::invalid_location: return "invalid-location";
    case Errc::invalid_target_pose: return "invalid-target-pose";
    case Errc::unknown_object: return "unknown-object";
    case Errc::invalid_parameter: return "invalid-parameter";
    case Errc::protocol_violation: return "protocol-violation";
    case Errc::process_failure: return "process-failure";
    case Errc::timeout: return "timeout";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::empty_cloud: return "empty-cloud";
    case Errc::invalid_spec: return "invalid-spec";
  }
  return "unknown-error";
}

}  // namespace coopscene
