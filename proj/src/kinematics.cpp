#include "atsim/kinematics.hpp"

#include <stdexcept>
#include <string>

namespace atsim {

void CouplingGains::validate() const {
  if (!(k_v > 0.0 && k_w > 0.0)) {
    throw std::invalid_argument("coupling gains must be positive");
  }
}

void MecanumParams::validate() const {
  if (!(wheel_R > 0.0 && roller_r > 0.0 && tx > 0.0 && ty > 0.0)) {
    throw std::invalid_argument("mecanum lengths must be positive");
  }
}

double MecanumParams::roller_angle(int wheel_index) {
  switch (wheel_index) {
    case 1:
    case 3: return -kPi / 4.0;
    case 2:
    case 4: return kPi / 4.0;
    default: throw std::out_of_range("wheel index must be 1..4, got " + std::to_string(wheel_index));
  }
}

Pose2D integrate_unicycle(const Pose2D& pose, const Twist& cmd, double dt) {
  Pose2D out;
  if (std::abs(cmd.w) >= kArcEpsilon) {
    const double radius = cmd.v / cmd.w;
    const double theta_end = pose.theta + cmd.w * dt;
    out.x = pose.x + radius * (std::sin(theta_end) - std::sin(pose.theta));
    out.y = pose.y - radius * (std::cos(theta_end) - std::cos(pose.theta));
    out.theta = wrap_angle(theta_end);
  } else {
    out.x = pose.x + cmd.v * std::cos(pose.theta) * dt;
    out.y = pose.y + cmd.v * std::sin(pose.theta) * dt;
    out.theta = wrap_angle(pose.theta + cmd.w * dt);
  }
  return out;
}

Pose2D integrate_omni(const Pose2D& pose, const Twist& body_vel, double dt) {
  const Twist world = body_to_world(body_vel, pose.theta);
  return {pose.x + world.v * dt, pose.y + world.vy * dt, wrap_angle(pose.theta + body_vel.w * dt)};
}

Twist scale_twist(const Twist& master, const CouplingGains& gains) {
  return {gains.k_v * master.v, gains.k_v * master.vy, gains.k_w * master.w};
}

Twist body_to_world(const Twist& body, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * body.v - s * body.vy, s * body.v + c * body.vy, body.w};
}

Eigen::Matrix3d mecanum_contact_jacobian(const MecanumParams& params, double theta,
                                         int wheel_index) {
  const double eta = MecanumParams::roller_angle(wheel_index);
  // Sign of the contact-offset column per wheel: (Ty, Tx), (Ty, -Tx),
  // (-Ty, -Tx), (-Ty, Tx).
  static constexpr std::array<std::array<double, 2>, 4> kOffsetSigns{{
      {1.0, 1.0}, {1.0, -1.0}, {-1.0, -1.0}, {-1.0, 1.0}}};
  const auto& sign = kOffsetSigns[static_cast<std::size_t>(wheel_index - 1)];

  const double R = params.wheel_R;
  const double r = params.roller_r;
  Eigen::Matrix3d J;
  J << -R * std::sin(theta), r * std::sin(theta + eta), sign[0] * params.ty,
       R * std::cos(theta), -r * std::cos(theta + eta), sign[1] * params.tx,
       0.0, 0.0, 1.0;
  return J;
}

Eigen::Matrix<double, 4, 3> mecanum_joint_rates(const Twist& world_vel,
                                                const MecanumParams& params,
                                                double theta) {
  const Eigen::Vector3d u(world_vel.v, world_vel.vy, world_vel.w);
  Eigen::Matrix<double, 4, 3> rates;
  for (int i = 1; i <= 4; ++i) {
    rates.row(i - 1) = (mecanum_contact_jacobian(params, theta, i).transpose() * u).transpose();
  }
  return rates;
}

WheelSpeeds mecanum_inverse_kinematics(const Twist& world_vel, const MecanumParams& params,
                                       double theta) {
  const auto rates = mecanum_joint_rates(world_vel, params, theta);
  WheelSpeeds out;
  for (int i = 0; i < 4; ++i) out.psi[static_cast<std::size_t>(i)] = rates(i, 0);
  return out;
}

}  // namespace atsim
