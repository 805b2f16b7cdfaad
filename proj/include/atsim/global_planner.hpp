#pragma once

#include <optional>
#include <vector>

#include "atsim/occupancy_grid.hpp"

namespace atsim {

struct PlannerParams {
  /// Traversal cost multiplier for cells whose state is Unknown.
  double unknown_cost_factor{2.0};
};

struct GlobalPath {
  std::vector<GridIndex> cells;
  std::vector<Vec2> waypoints;  // cell centers, start to goal
  double cost{0.0};
  std::size_t expanded{0};
};

/// 8-connected A* over the costmap's inflated cells. Diagonal moves may not cut
/// a lethal corner. The start cell is always expandable. Step cost is the
/// Euclidean step length times the destination cell's factor. nullopt when the
/// goal is outside the grid, lethal, or unreachable.
std::optional<GlobalPath> plan_global(const Costmap& costmap, const Pose2D& start, Vec2 goal,
                                      const PlannerParams& params = {});

}  // namespace atsim
