#include "atsim/types.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace atsim {

double wrap_angle(double angle) {
  double a = std::remainder(angle, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  return a;
}

std::string_view to_string(RobotKind kind) {
  switch (kind) {
    case RobotKind::DifferentialDrive: return "diff_drive";
    case RobotKind::Omnidirectional: return "omni";
  }
  return "diff_drive";
}

RobotKind robot_kind_from_string(std::string_view name) {
  if (name == "diff_drive") return RobotKind::DifferentialDrive;
  if (name == "omni") return RobotKind::Omnidirectional;
  throw std::invalid_argument("unknown robot kind: " + std::string(name));
}

void VelocityLimits::validate() const {
  if (!(v_max > 0.0 && w_max > 0.0 && accel_v > 0.0 && accel_w > 0.0)) {
    throw std::invalid_argument("velocity limits must be positive");
  }
  if (v_min < 0.0 || v_min > v_max) {
    throw std::invalid_argument("v_min must lie in [0, v_max]");
  }
}

namespace {

double clamp_finite(double value, double bound) {
  if (!std::isfinite(value)) return 0.0;
  return std::clamp(value, -bound, bound);
}

}  // namespace

Twist clamp_twist(const Twist& cmd, const VelocityLimits& limits, RobotKind kind) {
  // Reverse motion is allowed at the actuator level; v_min only constrains
  // what the planner samples.
  Twist out;
  out.v = clamp_finite(cmd.v, limits.v_max);
  out.vy = kind == RobotKind::Omnidirectional ? clamp_finite(cmd.vy, limits.v_max) : 0.0;
  out.w = clamp_finite(cmd.w, limits.w_max);
  return out;
}

}  // namespace atsim
