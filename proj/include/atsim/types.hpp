#pragma once

#include <cmath>
#include <numbers>
#include <string_view>

namespace atsim {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

struct Vec2 {
  double x{0.0};
  double y{0.0};

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Planar robot configuration. theta is kept wrapped by every operation
/// that produces a pose.
struct Pose2D {
  double x{0.0};
  double y{0.0};
  double theta{0.0};

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

/// Body-frame velocity command. vy is only ever non-zero for omnidirectional
/// robots.
struct Twist {
  double v{0.0};
  double vy{0.0};
  double w{0.0};

  bool is_zero() const { return v == 0.0 && vy == 0.0 && w == 0.0; }
  friend bool operator==(const Twist&, const Twist&) = default;
};

enum class RobotKind { DifferentialDrive, Omnidirectional };

std::string_view to_string(RobotKind kind);
RobotKind robot_kind_from_string(std::string_view name);

/// Actuator and planner velocity/acceleration limits.
struct VelocityLimits {
  double v_max{0.5};
  double v_min{0.0};
  double w_max{1.0};
  double accel_v{0.5};
  double accel_w{1.5};

  void validate() const;
  friend bool operator==(const VelocityLimits&, const VelocityLimits&) = default;
};

/// Clamps a command to the actuator envelope of the given robot kind.
Twist clamp_twist(const Twist& cmd, const VelocityLimits& limits, RobotKind kind);

}  // namespace atsim
