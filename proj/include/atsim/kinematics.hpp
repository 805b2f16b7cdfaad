#pragma once

#include <array>

#include <Eigen/Core>

#include "atsim/types.hpp"

namespace atsim {

/// Below this yaw rate the unicycle integrator switches from the closed-form
/// arc to a straight Euler step.
inline constexpr double kArcEpsilon = 1e-6;

/// Master-to-Client velocity scaling for robots of different size or drive.
struct CouplingGains {
  double k_v{1.0};
  double k_w{1.0};

  void validate() const;
};

/// Four-wheel Mecanum base. Roller angles are fixed at -45/+45/-45/+45 deg
/// for wheels 1..4. Defaults are youBot-scale reconstructions.
struct MecanumParams {
  double wheel_R{0.05};
  double roller_r{0.024};
  double tx{0.228};
  double ty{0.158};

  void validate() const;
  static double roller_angle(int wheel_index);
};

struct WheelSpeeds {
  std::array<double, 4> psi{};
};

/// Constant-twist pose integration for a differential-drive robot.
Pose2D integrate_unicycle(const Pose2D& pose, const Twist& cmd, double dt);

/// Euler step for a holonomic base: body (v, vy) rotated into the world frame.
Pose2D integrate_omni(const Pose2D& pose, const Twist& body_vel, double dt);

/// Component-wise scaling (v, vy by k_v; w by k_w).
Twist scale_twist(const Twist& master, const CouplingGains& gains);

/// Contact-frame Jacobian of wheel `wheel_index` (1..4) at platform heading
/// theta. Columns are (wheel, roller, contact yaw); rows are (x, y, theta).
Eigen::Matrix3d mecanum_contact_jacobian(const MecanumParams& params, double theta,
                                         int wheel_index);

/// Per-wheel joint rates J_i^T * (xdot, ydot, thetadot). Row i holds
/// (wheel, roller, contact yaw) for wheel i+1.
Eigen::Matrix<double, 4, 3> mecanum_joint_rates(const Twist& world_vel,
                                                const MecanumParams& params,
                                                double theta);

/// Wheel angular velocities: the wheel component of each wheel's joint rates.
/// world_vel is (xdot, ydot, thetadot) expressed in the world frame, carried in
/// (v, vy, w).
WheelSpeeds mecanum_inverse_kinematics(const Twist& world_vel, const MecanumParams& params,
                                       double theta);

/// Rotates a body-frame twist into the world frame at heading theta.
Twist body_to_world(const Twist& body, double theta);

}  // namespace atsim
