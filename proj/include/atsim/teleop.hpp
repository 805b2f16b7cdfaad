#pragma once

#include <optional>
#include <vector>

#include "atsim/global_planner.hpp"
#include "atsim/world.hpp"

namespace atsim {

/// Ground-truth occupancy of a room at `time`: a cell is occupied when its
/// center lies within half a cell of an obstacle or outside the room.
OccupancyGrid rasterize_room(const WorldSpec& room, double time, double resolution = 0.1);

struct OperatorParams {
  double cruise_speed{0.4};
  double max_turn_rate{0.8};
  double lookahead{0.5};
  /// Heading error beyond which the operator turns on the spot.
  double turn_in_place{kPi / 3.0};
  /// Distance at which the operator stops and confirms the goal.
  double stop_distance{0.1};
  double replan_period{1.0};
  /// Wait while a moving box is this close ahead.
  double wait_distance{0.6};
};

/// Deterministic stand-in for the human driving the Master: plans on the
/// Master room it can see and follows the plan by pure pursuit.
class ScriptedOperator {
 public:
  ScriptedOperator(const WorldSpec& master_room, Vec2 goal, OperatorParams params = {});

  /// Twist for the current Master pose. Sets confirmed() once it has stopped
  /// at the goal.
  Twist command(const Pose2D& pose, double now);
  bool confirmed() const { return confirmed_; }
  const std::vector<Vec2>& path() const { return path_; }

 private:
  void replan(const Pose2D& pose, double now);

  WorldSpec room_;
  Vec2 goal_;
  OperatorParams params_;
  std::vector<Vec2> path_;
  std::optional<double> last_plan_;
  bool confirmed_{false};
};

/// Pure-pursuit step toward `target`. Exposed for tests.
Twist pursue(const Pose2D& pose, Vec2 target, double speed, const OperatorParams& params);

}  // namespace atsim
