#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "atsim/dwa.hpp"
#include "atsim/global_planner.hpp"

namespace atsim {

enum class NavMode { Planning, Following, GoalReached, RecoveryRotation, Failed };

std::string_view to_string(NavMode mode);

struct NavParams {
  double goal_tolerance{0.3};
  double replan_period{2.0};
  double inflation_margin{0.1};
  double recovery_w{0.5};
  /// Give up after the planner has found no path for this long.
  double no_path_timeout{10.0};
  PlannerParams planner;
  DwaParams dwa;
};

struct NavState {
  NavMode mode{NavMode::Planning};
  Vec2 goal;
  std::vector<Vec2> path;
  Twist current_twist;
  double rotated{0.0};
  double last_theta{0.0};
};

/// Goal bookkeeping: entering the tolerance disc starts a full in-place turn,
/// after which the goal counts as reached.
NavState goal_step(NavState nav, const Pose2D& pose, double tolerance);

struct NavCounters {
  std::size_t grid_cell_updates{0};
  std::size_t scans{0};
  std::size_t plans{0};
  std::size_t astar_expanded{0};
  std::size_t dwa_calls{0};
  std::size_t dwa_samples{0};
  std::size_t dwa_arc_steps{0};
};

/// Mapping + planning stack for one robot. Uses the pose it is handed as
/// ground truth.
class Navigator {
 public:
  Navigator(const Rect& area, double footprint_radius, VelocityLimits limits, NavParams params = {});

  void set_goal(Vec2 goal);
  void on_scan(const Pose2D& pose, const LaserScan& scan);
  /// One control tick. `measured` is the robot's current twist.
  Twist control(const Pose2D& pose, const Twist& measured, double now, double dt);

  const NavState& state() const { return state_; }
  const NavCounters& counters() const { return counters_; }
  const OccupancyGrid& grid() const { return grid_; }
  /// Twists emitted by the last DWA call, for auditing.
  const std::optional<DwaResult>& last_dwa() const { return last_dwa_; }
  /// Window the last DWA call sampled.
  const VelocityWindow& last_window() const { return last_window_; }

 private:
  bool replan(const Costmap& costmap, const Pose2D& pose, double now);
  bool path_blocked(const Costmap& costmap, const Pose2D& pose) const;

  double footprint_;
  VelocityLimits limits_;
  NavParams params_;
  OccupancyGrid grid_;
  NavState state_;
  NavCounters counters_;
  std::optional<double> last_plan_time_;
  std::optional<double> no_path_since_;
  std::optional<DwaResult> last_dwa_;
  VelocityWindow last_window_;
  bool grid_dirty_{true};
  std::optional<Costmap> costmap_;
};

}  // namespace atsim
