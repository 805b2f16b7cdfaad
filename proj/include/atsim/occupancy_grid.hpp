#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atsim/types.hpp"
#include "atsim/world.hpp"

namespace atsim {

struct GridIndex {
  int ix{0};
  int iy{0};
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

enum class CellState { Unknown, Free, Occupied };

/// Log-odds occupancy grid updated from scans taken at known poses.
class OccupancyGrid {
 public:
  static constexpr double kFreeUpdate = -0.4;
  static constexpr double kHitUpdate = 0.85;
  static constexpr double kClamp = 10.0;
  static constexpr double kOccupiedProb = 0.65;
  static constexpr double kFreeProb = 0.35;

  OccupancyGrid(double resolution, Pose2D origin, int width, int height);

  /// Grid covering `area` plus a margin on every side.
  static OccupancyGrid covering(const Rect& area, double resolution = 0.1, double margin = 0.5);

  double resolution() const { return resolution_; }
  const Pose2D& origin() const { return origin_; }
  int width() const { return width_; }
  int height() const { return height_; }

  bool in_bounds(GridIndex c) const { return c.ix >= 0 && c.iy >= 0 && c.ix < width_ && c.iy < height_; }
  GridIndex cell_of(Vec2 p) const;
  Vec2 center_of(GridIndex c) const;

  double log_odds(GridIndex c) const { return log_odds_[flat(c)]; }
  void set_log_odds(GridIndex c, double value);
  double probability(GridIndex c) const;
  CellState state(GridIndex c) const;

  /// Applies one scan. Each cell crossed by any ray is freed once and each hit
  /// cell is marked once per scan; a cell both crossed and hit only gets the
  /// hit update. Returns the number of cell updates applied.
  std::size_t update(const Pose2D& pose, const LaserScan& scan);

  /// Cells on the digital line from a to b, both ends included.
  static std::vector<GridIndex> bresenham(GridIndex a, GridIndex b);

  /// Binary greymap (P5): occupied black, free white, unknown grey. Top row is max y.
  std::string to_pgm() const;
  nlohmann::json metadata() const;

 private:
  std::size_t flat(GridIndex c) const {
    return static_cast<std::size_t>(c.iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c.ix);
  }

  double resolution_;
  Pose2D origin_;
  int width_;
  int height_;
  std::vector<double> log_odds_;
};

/// Planning view of a grid: exact Euclidean distance (meters) from each cell
/// center to the nearest occupied cell center, plus cell states.
class Costmap {
 public:
  Costmap(const OccupancyGrid& grid, double inflation_radius);

  const OccupancyGrid& grid() const { return grid_; }
  double inflation_radius() const { return inflation_radius_; }
  double distance(GridIndex c) const { return dist_[flat(c)]; }
  /// Distance field bilinearly interpolated at p; 0 outside the grid.
  double distance_at(Vec2 p) const;
  bool lethal(GridIndex c) const { return distance(c) <= inflation_radius_; }
  bool unknown(GridIndex c) const { return grid_.state(c) == CellState::Unknown; }

 private:
  std::size_t flat(GridIndex c) const {
    return static_cast<std::size_t>(c.iy) * static_cast<std::size_t>(grid_.width()) + static_cast<std::size_t>(c.ix);
  }

  OccupancyGrid grid_;
  double inflation_radius_;
  std::vector<double> dist_;
};

/// Exact squared Euclidean distance transform (in cells^2) of a binary image,
/// row-major, sources marked true.
std::vector<double> squared_distance_transform(const std::vector<bool>& sources, int width, int height);

}  // namespace atsim
