#include "atsim/navigator.hpp"

#include <limits>

namespace atsim {

std::string_view to_string(NavMode mode) {
  switch (mode) {
    case NavMode::Planning: return "Planning";
    case NavMode::Following: return "Following";
    case NavMode::GoalReached: return "GoalReached";
    case NavMode::RecoveryRotation: return "RecoveryRotation";
    case NavMode::Failed: return "Failed";
  }
  return "Planning";
}

NavState goal_step(NavState nav, const Pose2D& pose, double tolerance) {
  switch (nav.mode) {
    case NavMode::Planning:
    case NavMode::Following:
      if (distance(pose.position(), nav.goal) <= tolerance) {
        nav.mode = NavMode::RecoveryRotation;
        nav.rotated = 0.0;
        nav.last_theta = pose.theta;
      }
      break;
    case NavMode::RecoveryRotation:
      nav.rotated += std::abs(wrap_angle(pose.theta - nav.last_theta));
      nav.last_theta = pose.theta;
      if (nav.rotated >= kTwoPi - 1e-9) {
        nav.mode = NavMode::GoalReached;
        nav.current_twist = {};
      }
      break;
    case NavMode::GoalReached:
    case NavMode::Failed:
      break;
  }
  return nav;
}

Navigator::Navigator(const Rect& area, double footprint_radius, VelocityLimits limits, NavParams params)
    : footprint_(footprint_radius),
      limits_(limits),
      params_(std::move(params)),
      grid_(OccupancyGrid::covering(area)) {
  limits_.validate();
}

void Navigator::set_goal(Vec2 goal) {
  state_ = NavState{};
  state_.goal = goal;
  last_plan_time_.reset();
  no_path_since_.reset();
}

void Navigator::on_scan(const Pose2D& pose, const LaserScan& scan) {
  counters_.grid_cell_updates += grid_.update(pose, scan);
  ++counters_.scans;
  grid_dirty_ = true;
}

bool Navigator::replan(const Costmap& costmap, const Pose2D& pose, double now) {
  ++counters_.plans;
  last_plan_time_ = now;
  auto path = plan_global(costmap, pose, state_.goal, params_.planner);
  if (!path) {
    state_.path.clear();
    return false;
  }
  counters_.astar_expanded += path->expanded;
  state_.path = std::move(path->waypoints);
  // The goal itself rather than its cell center is the final waypoint.
  state_.path.back() = state_.goal;
  return true;
}

bool Navigator::path_blocked(const Costmap& costmap, const Pose2D& pose) const {
  const auto& path = state_.path;
  std::size_t closest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double d = distance(path[i], pose.position());
    if (d < best) {
      best = d;
      closest = i;
    }
  }
  for (std::size_t i = closest + 1; i < path.size(); ++i) {
    const GridIndex c = costmap.grid().cell_of(path[i]);
    if (costmap.grid().in_bounds(c) && costmap.lethal(c)) return true;
  }
  return false;
}

Twist Navigator::control(const Pose2D& pose, const Twist& measured, double now, double dt) {
  state_ = goal_step(state_, pose, params_.goal_tolerance);
  switch (state_.mode) {
    case NavMode::GoalReached:
    case NavMode::Failed:
      state_.current_twist = {};
      return {};
    case NavMode::RecoveryRotation:
      state_.current_twist = {0.0, 0.0, params_.recovery_w};
      return state_.current_twist;
    case NavMode::Planning:
    case NavMode::Following:
      break;
  }

  if (grid_dirty_ || !costmap_) {
    costmap_.emplace(grid_, footprint_ + params_.inflation_margin);
    grid_dirty_ = false;
  }
  const bool due = !last_plan_time_ || now - *last_plan_time_ >= params_.replan_period - 1e-9;
  if (state_.mode == NavMode::Planning || due || path_blocked(*costmap_, pose)) {
    if (!replan(*costmap_, pose, now)) {
      state_.mode = NavMode::Planning;
      if (!no_path_since_) no_path_since_ = now;
      if (now - *no_path_since_ >= params_.no_path_timeout) state_.mode = NavMode::Failed;
      state_.current_twist = {};
      return {};
    }
    no_path_since_.reset();
    state_.mode = NavMode::Following;
  }

  last_window_ = dynamic_window(measured, limits_, dt);
  last_dwa_ = dwa_step(*costmap_, footprint_, pose, measured, state_.path, limits_, dt, params_.dwa);
  ++counters_.dwa_calls;
  counters_.dwa_samples += last_dwa_->samples.size();
  counters_.dwa_arc_steps += last_dwa_->arc_steps;
  if (last_dwa_->recovery) {
    state_.mode = NavMode::Planning;
    state_.current_twist = {};
    return {};
  }
  state_.current_twist = last_dwa_->twist;
  return state_.current_twist;
}

}  // namespace atsim
