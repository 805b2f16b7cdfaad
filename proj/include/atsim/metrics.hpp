#pragma once

#include <vector>

#include "atsim/types.hpp"

namespace atsim {

/// Pose expressed in the frame of `start` (the robot's start pose).
Pose2D start_aligned(const Pose2D& pose, const Pose2D& start);

/// Euclidean distance from the final position to the goal, both in the
/// robot's start-aligned frame.
double goal_error(const Pose2D& final_pose, Vec2 goal);

/// Mean distance between two start-aligned position traces sampled on the same
/// tick grid. Throws std::invalid_argument on a length mismatch; 0 for empty
/// traces.
double tracking_error(const std::vector<Vec2>& master, const std::vector<Vec2>& client);

struct SampleStats {
  double mean{0.0};
  double stddev{0.0};  // population
  double min{0.0};
  double max{0.0};
  std::size_t n{0};
};

SampleStats sample_stats(const std::vector<double>& values);

}  // namespace atsim
