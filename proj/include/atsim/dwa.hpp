#pragma once

#include <vector>

#include "atsim/occupancy_grid.hpp"

namespace atsim {

struct VelocityWindow {
  double v_lo{0.0};
  double v_hi{0.0};
  double w_lo{0.0};
  double w_hi{0.0};

  bool contains(double v, double w, double tol = 1e-12) const {
    return v >= v_lo - tol && v <= v_hi + tol && w >= w_lo - tol && w <= w_hi + tol;
  }
};

struct DwaParams {
  int n_v{11};
  int n_w{21};
  double sim_time{2.0};
  double sim_step{0.1};
  double alpha{0.8};  // heading
  double beta{0.1};   // clearance
  double gamma{0.1};  // velocity
  double clearance_cap{1.0};
  /// Arcs may not bring the footprint within this distance of an occupied cell
  /// center; covers cell discretization.
  double collision_margin{0.05};
  double lookahead{0.6};
};

struct DwaSample {
  double v{0.0};
  double w{0.0};
  double dist{0.0};
  bool admissible{false};
  double heading{0.0};
  double clearance{0.0};
  double score{0.0};
};

struct DwaResult {
  Twist twist;
  /// Every sample except (0, 0) was inadmissible.
  bool recovery{false};
  std::vector<DwaSample> samples;
  std::size_t arc_steps{0};
};

/// Velocities reachable within dt, intersected with the absolute limits.
VelocityWindow dynamic_window(const Twist& current, const VelocityLimits& limits, double dt);

/// The pair can brake to a stop within `dist` along its arc.
bool admissible(double v, double w, double dist, const VelocityLimits& limits);

/// Local target: first path point at least `lookahead` from the robot, searching
/// forward from the path point closest to it; the last point otherwise.
Vec2 local_target(const std::vector<Vec2>& path, Vec2 robot, double lookahead);

std::size_t closest_index(const std::vector<Vec2>& path, Vec2 robot);

/// True when every point of segment a-b is at least `threshold` from occupied cells.
bool line_clear(const Costmap& costmap, Vec2 a, Vec2 b, double threshold);

/// Like local_target, but stops at the last path point in straight-line view of
/// the robot so the heading term never points through an obstacle corner.
Vec2 visible_target(const Costmap& costmap, const std::vector<Vec2>& path, Vec2 robot,
                    double lookahead, double threshold);

/// Samples the dynamic window, drops inadmissible pairs, returns the best score.
/// Heading is scored toward visible_target from each arc's end pose.
/// Throws std::invalid_argument on an empty path.
DwaResult dwa_step(const Costmap& costmap, double footprint_radius, const Pose2D& pose,
                   const Twist& current, const std::vector<Vec2>& path,
                   const VelocityLimits& limits, double dt, const DwaParams& params = {});

}  // namespace atsim
