#include "atsim/occupancy_grid.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace atsim {

OccupancyGrid::OccupancyGrid(double resolution, Pose2D origin, int width, int height)
    : resolution_(resolution), origin_(origin), width_(width), height_(height) {
  if (!(resolution > 0.0) || width <= 0 || height <= 0) {
    throw std::invalid_argument("grid needs positive resolution and size");
  }
  if (origin.theta != 0.0) throw std::invalid_argument("rotated grid origins are not supported");
  log_odds_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0);
}

OccupancyGrid OccupancyGrid::covering(const Rect& area, double resolution, double margin) {
  const int w = static_cast<int>(std::ceil((area.x_max - area.x_min + 2 * margin) / resolution));
  const int h = static_cast<int>(std::ceil((area.y_max - area.y_min + 2 * margin) / resolution));
  return OccupancyGrid(resolution, {area.x_min - margin, area.y_min - margin, 0.0}, w, h);
}

GridIndex OccupancyGrid::cell_of(Vec2 p) const {
  return {static_cast<int>(std::floor((p.x - origin_.x) / resolution_)),
          static_cast<int>(std::floor((p.y - origin_.y) / resolution_))};
}

Vec2 OccupancyGrid::center_of(GridIndex c) const {
  return {origin_.x + (c.ix + 0.5) * resolution_, origin_.y + (c.iy + 0.5) * resolution_};
}

void OccupancyGrid::set_log_odds(GridIndex c, double value) {
  log_odds_[flat(c)] = std::clamp(value, -kClamp, kClamp);
}

double OccupancyGrid::probability(GridIndex c) const {
  return 1.0 / (1.0 + std::exp(-log_odds(c)));
}

CellState OccupancyGrid::state(GridIndex c) const {
  const double p = probability(c);
  if (p >= kOccupiedProb) return CellState::Occupied;
  if (p <= kFreeProb) return CellState::Free;
  return CellState::Unknown;
}

std::vector<GridIndex> OccupancyGrid::bresenham(GridIndex a, GridIndex b) {
  std::vector<GridIndex> out;
  const int dx = std::abs(b.ix - a.ix);
  const int dy = -std::abs(b.iy - a.iy);
  const int sx = a.ix < b.ix ? 1 : -1;
  const int sy = a.iy < b.iy ? 1 : -1;
  int err = dx + dy;
  GridIndex c = a;
  out.reserve(static_cast<std::size_t>(std::max(dx, -dy) + 1));
  while (true) {
    out.push_back(c);
    if (c == b) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      c.ix += sx;
    }
    if (e2 <= dx) {
      err += dx;
      c.iy += sy;
    }
  }
  return out;
}

std::size_t OccupancyGrid::update(const Pose2D& pose, const LaserScan& scan) {
  const std::size_t n = log_odds_.size();
  std::vector<std::uint8_t> mark(n, 0);  // 1 = crossed, 2 = hit
  const GridIndex start = cell_of(pose.position());
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const double r = std::clamp(scan.ranges[i], 0.0, scan.range_max);
    const bool hit = r < scan.range_max;
    const double a = pose.theta + scan.angle_min + static_cast<double>(i) * scan.angle_increment;
    const GridIndex end = cell_of({pose.x + r * std::cos(a), pose.y + r * std::sin(a)});
    const auto cells = bresenham(start, end);
    const std::size_t last = cells.size() - 1;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (!in_bounds(cells[k])) break;
      auto& m = mark[flat(cells[k])];
      if (hit && k == last) {
        m = 2;
      } else if (m == 0) {
        m = 1;
      }
    }
  }
  std::size_t updates = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mark[i] == 0) continue;
    const double delta = mark[i] == 2 ? kHitUpdate : kFreeUpdate;
    log_odds_[i] = std::clamp(log_odds_[i] + delta, -kClamp, kClamp);
    ++updates;
  }
  return updates;
}

std::string OccupancyGrid::to_pgm() const {
  std::string out = "P5\n" + std::to_string(width_) + " " + std::to_string(height_) + "\n255\n";
  for (int iy = height_ - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < width_; ++ix) {
      switch (state({ix, iy})) {
        case CellState::Occupied: out.push_back(static_cast<char>(0)); break;
        case CellState::Free: out.push_back(static_cast<char>(254)); break;
        case CellState::Unknown: out.push_back(static_cast<char>(205)); break;
      }
    }
  }
  return out;
}

nlohmann::json OccupancyGrid::metadata() const {
  return {{"resolution", resolution_},
          {"origin", {origin_.x, origin_.y, origin_.theta}},
          {"width", width_},
          {"height", height_},
          {"occupied_thresh", kOccupiedProb},
          {"free_thresh", kFreeProb}};
}

namespace {

// 1D lower envelope of parabolas (Felzenszwalb & Huttenlocher). Empty cells
// carry kFar instead of infinity so the intersection arithmetic stays finite.
constexpr double kFar = 1e20;

void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  int k = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
    const int p = v[static_cast<std::size_t>(k)];
    d[q] = double(q - p) * (q - p) + f[p];
  }
}

}  // namespace

std::vector<double> squared_distance_transform(const std::vector<bool>& sources, int width, int height) {
  const std::size_t w = static_cast<std::size_t>(width);
  const std::size_t h = static_cast<std::size_t>(height);
  std::vector<double> grid(w * h);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = sources[i] ? 0.0 : kFar;

  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> col_in(h), col_out(h);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) col_in[y] = grid[y * w + x];
    edt_1d(col_in.data(), col_out.data(), height, v, z);
    for (std::size_t y = 0; y < h; ++y) grid[y * w + x] = col_out[y];
  }
  std::vector<double> row_out(w);
  for (std::size_t y = 0; y < h; ++y) {
    edt_1d(&grid[y * w], row_out.data(), width, v, z);
    std::copy(row_out.begin(), row_out.end(), grid.begin() + static_cast<std::ptrdiff_t>(y * w));
  }
  for (double& d : grid) {
    if (d >= kFar) d = std::numeric_limits<double>::infinity();
  }
  return grid;
}

Costmap::Costmap(const OccupancyGrid& grid, double inflation_radius)
    : grid_(grid), inflation_radius_(inflation_radius) {
  const int w = grid.width();
  const int h = grid.height();
  std::vector<bool> occupied(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      occupied[flat({ix, iy})] = grid.state({ix, iy}) == CellState::Occupied;
    }
  }
  dist_ = squared_distance_transform(occupied, w, h);
  for (double& d : dist_) d = std::sqrt(d) * grid.resolution();
}

double Costmap::distance_at(Vec2 p) const {
  const GridIndex c = grid_.cell_of(p);
  if (!grid_.in_bounds(c)) return 0.0;
  // Bilinear interpolation between the four surrounding cell centers.
  const double res = grid_.resolution();
  const double gx = (p.x - grid_.origin().x) / res - 0.5;
  const double gy = (p.y - grid_.origin().y) / res - 0.5;
  const int x0 = std::clamp(static_cast<int>(std::floor(gx)), 0, grid_.width() - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(gy)), 0, grid_.height() - 1);
  const int x1 = std::min(x0 + 1, grid_.width() - 1);
  const int y1 = std::min(y0 + 1, grid_.height() - 1);
  const double tx = std::clamp(gx - x0, 0.0, 1.0);
  const double ty = std::clamp(gy - y0, 0.0, 1.0);
  const double d00 = distance({x0, y0});
  const double d10 = distance({x1, y0});
  const double d01 = distance({x0, y1});
  const double d11 = distance({x1, y1});
  if (!std::isfinite(d00 + d10 + d01 + d11)) return std::min({d00, d10, d01, d11});
  return (1 - ty) * ((1 - tx) * d00 + tx * d10) + ty * ((1 - tx) * d01 + tx * d11);
}

}  // namespace atsim
