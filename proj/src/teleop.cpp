#include "atsim/teleop.hpp"

#include <algorithm>

#include "atsim/dwa.hpp"

namespace atsim {

OccupancyGrid rasterize_room(const WorldSpec& room, double time, double resolution) {
  auto grid = OccupancyGrid::covering(room.bounds(), resolution);
  WorldSpec probe = room;
  probe.robot_footprint_radius = resolution / 2.0;
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      const Vec2 c = grid.center_of({ix, iy});
      const bool hit = check_collision(probe, time, {c.x, c.y, 0.0});
      grid.set_log_odds({ix, iy}, hit ? OccupancyGrid::kClamp : -OccupancyGrid::kClamp);
    }
  }
  return grid;
}

Twist pursue(const Pose2D& pose, Vec2 target, double speed, const OperatorParams& params) {
  const Vec2 d = target - pose.position();
  const double dist = norm(d);
  if (dist < 1e-9) return {};
  const double alpha = wrap_angle(std::atan2(d.y, d.x) - pose.theta);
  if (std::abs(alpha) > params.turn_in_place) {
    return {0.0, 0.0, alpha > 0.0 ? params.max_turn_rate : -params.max_turn_rate};
  }
  const double curvature = 2.0 * std::sin(alpha) / dist;
  return {speed, 0.0, std::clamp(speed * curvature, -params.max_turn_rate, params.max_turn_rate)};
}

ScriptedOperator::ScriptedOperator(const WorldSpec& master_room, Vec2 goal, OperatorParams params)
    : room_(master_room), goal_(goal), params_(params) {}

void ScriptedOperator::replan(const Pose2D& pose, double now) {
  last_plan_ = now;
  const Costmap costmap(rasterize_room(room_, now), room_.robot_footprint_radius + 0.1);
  const auto plan = plan_global(costmap, pose, goal_);
  if (!plan) return;  // keep following the previous plan
  path_ = plan->waypoints;
  path_.back() = goal_;
}

Twist ScriptedOperator::command(const Pose2D& pose, double now) {
  if (confirmed_) return {};
  const double d = distance(pose.position(), goal_);
  if (d <= params_.stop_distance) {
    confirmed_ = true;
    return {};
  }
  const bool dynamic = !room_.dynamic_obstacles.empty();
  if (!last_plan_ || (dynamic && now - *last_plan_ >= params_.replan_period - 1e-9)) replan(pose, now);
  if (path_.empty()) return {};

  for (const auto& box : room_.dynamic_obstacles) {
    const Vec2 rel = box.position_at(now) - pose.position();
    const double bearing = wrap_angle(std::atan2(rel.y, rel.x) - pose.theta);
    const double gap = norm(rel) - std::max(box.half_width, box.half_height) - room_.robot_footprint_radius;
    if (gap < params_.wait_distance && std::abs(bearing) < kPi / 3.0) return {};
  }

  const Vec2 target = local_target(path_, pose.position(), params_.lookahead);
  const double speed = std::min(params_.cruise_speed, std::max(0.05, 0.8 * d));
  return pursue(pose, target, speed, params_);
}

}  // namespace atsim
