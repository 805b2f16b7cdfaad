#include "atsim/global_planner.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace atsim {

namespace {

struct Open {
  double f;
  std::uint64_t order;
  int index;
  bool operator>(const Open& o) const { return f != o.f ? f > o.f : order > o.order; }
};

constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

}  // namespace

std::optional<GlobalPath> plan_global(const Costmap& costmap, const Pose2D& start, Vec2 goal,
                                      const PlannerParams& params) {
  const OccupancyGrid& grid = costmap.grid();
  const GridIndex s = grid.cell_of(start.position());
  const GridIndex g = grid.cell_of(goal);
  if (!grid.in_bounds(s) || !grid.in_bounds(g)) return std::nullopt;
  if (costmap.lethal(g) && !(g == s)) return std::nullopt;

  const int w = grid.width();
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(grid.height());
  auto idx = [w](GridIndex c) { return c.iy * w + c.ix; };
  auto cell = [w](int i) { return GridIndex{i % w, i / w}; };
  const double res = grid.resolution();
  const Vec2 goal_center = grid.center_of(g);
  auto heuristic = [&](GridIndex c) { return distance(grid.center_of(c), goal_center); };

  std::vector<double> g_cost(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<bool> closed(n, false);
  std::priority_queue<Open, std::vector<Open>, std::greater<>> open;
  std::uint64_t order = 0;

  g_cost[static_cast<std::size_t>(idx(s))] = 0.0;
  open.push({heuristic(s), order++, idx(s)});
  GlobalPath out;
  bool found = false;
  while (!open.empty()) {
    const Open top = open.top();
    open.pop();
    const auto ti = static_cast<std::size_t>(top.index);
    if (closed[ti]) continue;
    closed[ti] = true;
    ++out.expanded;
    const GridIndex c = cell(top.index);
    if (c == g) {
      found = true;
      break;
    }
    for (int k = 0; k < 8; ++k) {
      const GridIndex nb{c.ix + kDx[k], c.iy + kDy[k]};
      if (!grid.in_bounds(nb) || costmap.lethal(nb)) continue;
      const bool diagonal = k >= 4;
      if (diagonal && (costmap.lethal({c.ix + kDx[k], c.iy}) || costmap.lethal({c.ix, c.iy + kDy[k]}))) {
        continue;
      }
      const auto ni = static_cast<std::size_t>(idx(nb));
      if (closed[ni]) continue;
      const double factor = costmap.unknown(nb) ? params.unknown_cost_factor : 1.0;
      const double step = (diagonal ? std::sqrt(2.0) : 1.0) * res * factor;
      const double cand = g_cost[ti] + step;
      if (cand < g_cost[ni]) {
        g_cost[ni] = cand;
        parent[ni] = top.index;
        open.push({cand + heuristic(nb), order++, idx(nb)});
      }
    }
  }
  if (!found) return std::nullopt;

  out.cost = g_cost[static_cast<std::size_t>(idx(g))];
  for (int i = idx(g); i >= 0; i = parent[static_cast<std::size_t>(i)]) out.cells.push_back(cell(i));
  std::reverse(out.cells.begin(), out.cells.end());
  out.waypoints.reserve(out.cells.size());
  for (const auto& c : out.cells) out.waypoints.push_back(grid.center_of(c));
  return out;
}

}  // namespace atsim
