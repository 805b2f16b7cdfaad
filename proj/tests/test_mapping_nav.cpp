#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "atsim/navigator.hpp"
#include "atsim/world.hpp"

using namespace atsim;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

OccupancyGrid unit_grid(int w, int h) { return OccupancyGrid(1.0, {0.0, 0.0, 0.0}, w, h); }

void fill(OccupancyGrid& grid, double value) {
  for (int y = 0; y < grid.height(); ++y)
    for (int x = 0; x < grid.width(); ++x) grid.set_log_odds({x, y}, value);
}

LaserScan scan_from(const WorldState& s, const Pose2D& pose) { return raycast_scan(s, pose); }

// Plain label-correcting shortest path over the same move model as the planner:
// 8-connected, no lethal corner cutting, unknown cells at twice the cost.
// Lethality is recomputed here by brute force over occupied cells.
double dijkstra_oracle(const OccupancyGrid& grid, double inflation, GridIndex s, GridIndex g) {
  const int w = grid.width(), h = grid.height();
  std::vector<bool> lethal(static_cast<std::size_t>(w * h), false);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int oy = 0; oy < h; ++oy)
        for (int ox = 0; ox < w; ++ox)
          if (grid.state({ox, oy}) == CellState::Occupied &&
              std::hypot(ox - x, oy - y) * grid.resolution() <= inflation) {
            lethal[static_cast<std::size_t>(y * w + x)] = true;
          }
  auto is_lethal = [&](int x, int y) {
    return x < 0 || y < 0 || x >= w || y >= h || lethal[static_cast<std::size_t>(y * w + x)];
  };
  if (is_lethal(g.ix, g.iy) && !(g == s)) return kInf;

  std::vector<double> dist(static_cast<std::size_t>(w * h), kInf);
  dist[static_cast<std::size_t>(s.iy * w + s.ix)] = 0.0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d = dist[static_cast<std::size_t>(y * w + x)];
        if (d == kInf) continue;
        if (is_lethal(x, y) && !(GridIndex{x, y} == s)) continue;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx, ny = y + dy;
            if (is_lethal(nx, ny)) continue;
            if (dx != 0 && dy != 0 && (is_lethal(x + dx, y) || is_lethal(x, y + dy))) continue;
            const double factor = grid.state({nx, ny}) == CellState::Unknown ? 2.0 : 1.0;
            const double step = std::hypot(dx, dy) * grid.resolution() * factor;
            auto& nd = dist[static_cast<std::size_t>(ny * w + nx)];
            if (d + step < nd - 1e-12) {
              nd = d + step;
              changed = true;
            }
          }
        }
      }
    }
  }
  return dist[static_cast<std::size_t>(g.iy * w + g.ix)];
}

}  // namespace

TEST_CASE("update_grid worked examples") {
  auto spec = std::make_shared<WorldSpec>();
  spec->walls = false;
  spec->static_obstacles.emplace_back(Rect{1.0, -2.0, 1.5, 2.0});
  const auto world = WorldState::initial(spec);
  auto grid = OccupancyGrid::covering({-3.0, -3.0, 3.0, 3.0});
  const auto scan = scan_from(world, {});
  grid.update({}, scan);

  // Ray 180 hits the face at 1.0 m straight ahead.
  const GridIndex hit = grid.cell_of({1.0 + 1e-6, 0.0});
  CHECK(grid.log_odds(hit) == doctest::Approx(OccupancyGrid::kHitUpdate));
  CHECK(grid.state(hit) == CellState::Occupied);
  CHECK(grid.log_odds(grid.cell_of({0.5, 0.0})) == doctest::Approx(OccupancyGrid::kFreeUpdate));

  // Ray 0 points backwards into open space and reaches range_max: nothing occupied.
  for (double d = 0.05; d < 5.0; d += 0.1) {
    const GridIndex c = grid.cell_of({-d, 0.0});
    if (!grid.in_bounds(c)) break;
    CHECK(grid.log_odds(c) <= 0.0);
  }
  CHECK(grid.log_odds(grid.cell_of({-1.0, 0.0})) == doctest::Approx(OccupancyGrid::kFreeUpdate));

  // Repeated identical scans: the hit cell converges toward 1 monotonically.
  double prev = grid.probability(hit);
  for (int i = 0; i < 30; ++i) {
    grid.update({}, scan);
    const double p = grid.probability(hit);
    CHECK(p >= prev);
    prev = p;
  }
  CHECK(prev > 0.9999);
  CHECK(grid.log_odds(hit) == doctest::Approx(OccupancyGrid::kClamp));
}

TEST_CASE("update_grid does not depend on ray order") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> range(0.2, 6.0);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    LaserScan scan;
    scan.range_max = 5.0;
    scan.angle_min = -kPi;
    scan.angle_increment = kTwoPi / 90;
    for (int i = 0; i < 90; ++i) scan.ranges.push_back(std::min(range(rng), 5.0));
    LaserScan reversed = scan;
    reversed.angle_min = scan.angle_min + 89 * scan.angle_increment;
    reversed.angle_increment = -scan.angle_increment;
    std::reverse(reversed.ranges.begin(), reversed.ranges.end());

    const Pose2D pose{coord(rng), coord(rng), 0.0};
    auto a = OccupancyGrid::covering({-6.0, -6.0, 6.0, 6.0});
    auto b = a;
    CHECK(a.update(pose, scan) == b.update(pose, reversed));
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x) CHECK(a.log_odds({x, y}) == b.log_odds({x, y}));
  }
}

TEST_CASE("bresenham covers both ends with unit steps") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> c(-20, 20);
  for (int i = 0; i < 500; ++i) {
    const GridIndex a{c(rng), c(rng)}, b{c(rng), c(rng)};
    const auto line = OccupancyGrid::bresenham(a, b);
    CHECK(line.front() == a);
    CHECK(line.back() == b);
    CHECK(line.size() == static_cast<std::size_t>(std::max(std::abs(b.ix - a.ix), std::abs(b.iy - a.iy)) + 1));
    for (std::size_t k = 1; k < line.size(); ++k) {
      CHECK(std::abs(line[k].ix - line[k - 1].ix) <= 1);
      CHECK(std::abs(line[k].iy - line[k - 1].iy) <= 1);
    }
  }
}

TEST_CASE("distance transform matches brute force") {
  std::mt19937_64 rng(21);
  std::bernoulli_distribution occupied(0.08);
  for (int trial = 0; trial < 30; ++trial) {
    const int w = 13, h = 9;
    std::vector<bool> src(static_cast<std::size_t>(w * h));
    for (std::size_t i = 0; i < src.size(); ++i) src[i] = occupied(rng);
    const auto d = squared_distance_transform(src, w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double best = kInf;
        for (int oy = 0; oy < h; ++oy)
          for (int ox = 0; ox < w; ++ox)
            if (src[static_cast<std::size_t>(oy * w + ox)])
              best = std::min(best, double((ox - x) * (ox - x) + (oy - y) * (oy - y)));
        CHECK(d[static_cast<std::size_t>(y * w + x)] == best);
      }
    }
  }
}

TEST_CASE("plan_global worked examples") {
  auto grid = unit_grid(10, 10);
  fill(grid, -OccupancyGrid::kClamp);
  const Costmap empty(grid, 0.0);
  const auto path = plan_global(empty, {0.5, 0.5, 0.0}, {3.5, 0.5});
  REQUIRE(path);
  REQUIRE(path->waypoints.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(path->waypoints[static_cast<std::size_t>(i)] == Vec2{i + 0.5, 0.5});
  CHECK(path->cost == doctest::Approx(3.0));

  // Goal inside an inflated obstacle.
  grid.set_log_odds({5, 5}, OccupancyGrid::kClamp);
  const Costmap inflated(grid, 1.5);
  CHECK_FALSE(plan_global(inflated, {0.5, 0.5, 0.0}, {6.5, 5.5}));
  CHECK_FALSE(plan_global(inflated, {0.5, 0.5, 0.0}, {20.0, 0.5}));

  // 5x5 with a wall at column 2, rows 0-3: the only way round is through row 4,
  // and the cells beside the wall top cannot be entered diagonally.
  auto walled = unit_grid(5, 5);
  fill(walled, -OccupancyGrid::kClamp);
  for (int y = 0; y < 4; ++y) walled.set_log_odds({2, y}, OccupancyGrid::kClamp);
  const auto around = plan_global(Costmap(walled, 0.0), {0.5, 0.5, 0.0}, {4.5, 0.5});
  REQUIRE(around);
  CHECK(around->cost == doctest::Approx(8.0 + 2.0 * std::sqrt(2.0)));
  CHECK(std::find(around->cells.begin(), around->cells.end(), GridIndex{2, 4}) != around->cells.end());

  // Unknown cells cost double.
  auto unknown = unit_grid(10, 10);
  const auto through_unknown = plan_global(Costmap(unknown, 0.0), {0.5, 0.5, 0.0}, {3.5, 0.5});
  REQUIRE(through_unknown);
  CHECK(through_unknown->cost == doctest::Approx(6.0));
}

TEST_CASE("plan_global equals the Dijkstra oracle on random 10x10 grids") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> cell(0, 9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int solved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto grid = unit_grid(10, 10);
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 10; ++x) {
        const double r = u(rng);
        grid.set_log_odds({x, y}, r < 0.22 ? OccupancyGrid::kClamp : r < 0.4 ? 0.0 : -OccupancyGrid::kClamp);
      }
    }
    const GridIndex s{cell(rng), cell(rng)}, g{cell(rng), cell(rng)};
    grid.set_log_odds(s, -OccupancyGrid::kClamp);
    const double inflation = trial % 2 ? 0.0 : 1.0;
    const Costmap costmap(grid, inflation);
    const double expected = dijkstra_oracle(grid, inflation, s, g);
    const auto path = plan_global(costmap, {s.ix + 0.5, s.iy + 0.5, 0.0}, {g.ix + 0.5, g.iy + 0.5});
    if (expected == kInf) {
      CHECK_FALSE(path);
      continue;
    }
    REQUIRE(path);
    ++solved;
    CHECK(path->cost == doctest::Approx(expected).epsilon(1e-9));
    CHECK(path->cells.front() == s);
    CHECK(path->cells.back() == g);
    // The returned cells realise the reported cost.
    double walked = 0.0;
    for (std::size_t k = 1; k < path->cells.size(); ++k) {
      const auto& c = path->cells[k];
      const double factor = grid.state(c) == CellState::Unknown ? 2.0 : 1.0;
      walked += std::hypot(c.ix - path->cells[k - 1].ix, c.iy - path->cells[k - 1].iy) * factor;
      CHECK_FALSE(costmap.lethal(c));
    }
    CHECK(walked == doctest::Approx(path->cost));
  }
  CHECK(solved > 30);
}

TEST_CASE("admissible worked examples") {
  VelocityLimits lim;
  lim.v_max = 2.0;
  lim.accel_v = 1.0;
  CHECK_FALSE(admissible(1.0, 0.0, 0.04, lim));
  CHECK(admissible(0.2, 0.0, 0.04, lim));
  CHECK(admissible(0.0, 0.0, 0.0, lim));
  CHECK_FALSE(admissible(0.01, 0.0, 0.0, lim));
  CHECK_FALSE(admissible(0.0, 0.01, 0.0, lim));
  CHECK(admissible(0.5, 1.0, kInf, lim));
}

TEST_CASE("dynamic_window worked examples") {
  VelocityLimits lim;  // accel_v 0.5, accel_w 1.5
  auto win = dynamic_window({}, lim, 0.1);
  CHECK(win.v_lo == 0.0);
  CHECK(win.v_hi == doctest::Approx(0.05));
  CHECK(win.w_lo == doctest::Approx(-0.15));
  CHECK(win.w_hi == doctest::Approx(0.15));

  win = dynamic_window({0.49, 0.0, 0.3}, lim, 0.1);
  CHECK(win.v_hi == lim.v_max);
  CHECK(win.v_lo == doctest::Approx(0.44));
  CHECK(win.w_hi - 0.3 == doctest::Approx(0.3 - win.w_lo));

  win = dynamic_window({0.0, 0.0, 0.95}, lim, 0.1);
  CHECK(win.w_hi == lim.w_max);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> v(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto w = dynamic_window({v(rng), 0.0, 2 * v(rng)}, lim, 0.1);
    CHECK(w.v_lo <= w.v_hi);
    CHECK(w.w_lo <= w.w_hi);
    CHECK(w.v_hi <= lim.v_max);
    CHECK(w.v_lo >= lim.v_min);
    CHECK(std::abs(w.w_lo) <= lim.w_max);
    CHECK(std::abs(w.w_hi) <= lim.w_max);
  }
}

TEST_CASE("dwa_step on an empty grid matches exhaustive lattice scoring") {
  auto grid = OccupancyGrid::covering({-3.0, -3.0, 3.0, 3.0});
  fill(grid, -OccupancyGrid::kClamp);
  const Costmap costmap(grid, 0.28);
  const VelocityLimits lim;
  const DwaParams params;
  std::vector<Vec2> path;
  for (int i = 0; i <= 20; ++i) path.push_back({0.1 * i, 0.0});

  const auto result = dwa_step(costmap, 0.18, {}, {}, path, lim, 0.1, params);
  CHECK_FALSE(result.recovery);
  CHECK(result.samples.size() == 231);
  CHECK(result.twist.w == 0.0);
  CHECK(result.twist.v == doctest::Approx(0.05));

  // Independent scoring: closed-form arc end pose, target 0.6 m ahead, clearance
  // saturated, every sample admissible.
  const Vec2 target{0.6, 0.0};
  double best_score = -1.0, best_v = 0.0, best_w = 0.0;
  for (int iv = 0; iv < 11; ++iv) {
    for (int iw = 0; iw < 21; ++iw) {
      const double v = 0.025 + 0.025 * (iv - 5) / 5.0;
      const double w = 0.15 * (iw - 10) / 10.0;
      const double T = params.sim_time;
      Vec2 end;
      double th = w * T;
      if (std::abs(w) < 1e-12) end = {v * T, 0.0};
      else end = {v / w * std::sin(th), v / w * (1.0 - std::cos(th))};
      const double bearing = std::atan2(target.y - end.y, target.x - end.x);
      const double heading = 1.0 - std::abs(wrap_angle(bearing - th)) / kPi;
      const double score = 0.8 * heading + 0.1 + 0.1 * v / lim.v_max;
      const bool better = score > best_score + 1e-12 ||
                          (std::abs(score - best_score) <= 1e-12 &&
                           (v > best_v || (v == best_v && std::abs(w) < std::abs(best_w))));
      if (better) {
        best_score = score;
        best_v = v;
        best_w = w;
      }
    }
  }
  CHECK(result.twist.v == doctest::Approx(best_v));
  CHECK(result.twist.w == doctest::Approx(best_w));
}

TEST_CASE("dwa_step turns toward a target behind the robot") {
  auto grid = OccupancyGrid::covering({-3.0, -3.0, 3.0, 3.0});
  fill(grid, -OccupancyGrid::kClamp);
  const Costmap costmap(grid, 0.28);
  const std::vector<Vec2> path{{0.0, 0.0}, {-0.5, 0.05}, {-1.0, 0.1}, {-2.0, 0.2}};
  const auto result = dwa_step(costmap, 0.18, {}, {}, path, {}, 0.1);
  CHECK_FALSE(result.recovery);
  CHECK(std::abs(result.twist.w) > 0.0);
  CHECK_THROWS_AS(dwa_step(costmap, 0.18, {}, {}, {}, {}, 0.1), std::invalid_argument);
}

TEST_CASE("dwa_step boxed in by occupied cells signals recovery") {
  auto grid = OccupancyGrid::covering({-3.0, -3.0, 3.0, 3.0});
  fill(grid, -OccupancyGrid::kClamp);
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      if (dx || dy) grid.set_log_odds(grid.cell_of({0.1 * dx, 0.1 * dy}), OccupancyGrid::kClamp);
  const Costmap costmap(grid, 0.28);
  const auto result = dwa_step(costmap, 0.18, {}, {}, {{0.0, 0.0}, {1.0, 0.0}}, {}, 0.1);
  CHECK(result.recovery);
  CHECK(result.twist == Twist{});
}

TEST_CASE("goal_step worked examples") {
  NavState nav;
  nav.mode = NavMode::Following;
  nav.goal = {5.0, 0.0};
  CHECK(goal_step(nav, {}, 0.3).mode == NavMode::Following);

  nav = goal_step(nav, {4.8, 0.1, 1.0}, 0.3);
  CHECK(nav.mode == NavMode::RecoveryRotation);
  for (int i = 0; i < 62; ++i) {
    nav = goal_step(nav, {4.8, 0.1, wrap_angle(1.0 + 0.1 * (i + 1))}, 0.3);
    CHECK(nav.mode == NavMode::RecoveryRotation);
  }
  nav = goal_step(nav, {4.8, 0.1, wrap_angle(1.0 + 6.3)}, 0.3);
  CHECK(nav.mode == NavMode::GoalReached);
  CHECK(nav.current_twist == Twist{});
  CHECK(goal_step(nav, {}, 0.3).mode == NavMode::GoalReached);
}

TEST_CASE("closed-loop navigation: admissible twists and monotone progress") {
  struct Task {
    int scenario;
    Vec2 goal;
    bool straight;
  };
  for (const Task& task : {Task{1, {4.0, 0.0}, true}, Task{2, {7.8, -1.8}, false}, Task{3, {6.8, 2.0}, false}}) {
    CAPTURE(task.scenario);
    const auto spec = std::make_shared<const WorldSpec>(load_scenario(task.scenario).client);
    auto s = WorldState::initial(spec);
    Navigator nav(spec->bounds(), spec->robot_footprint_radius, spec->limits);
    nav.set_goal(task.goal);
    Twist cmd;
    double prev_dist = distance(s.pose.position(), task.goal);
    for (int k = 0; k < 6000; ++k) {
      if (k % 2 == 0) {
        nav.on_scan(s.pose, raycast_scan(s, s.pose));
        const std::size_t calls = nav.counters().dwa_calls;
        const Twist measured = s.twist;
        cmd = nav.control(s.pose, measured, s.time, 0.1);
        if (nav.counters().dwa_calls > calls && nav.last_dwa()) {
          const auto& r = *nav.last_dwa();
          CHECK(r.twist == cmd);
          if (r.recovery) {
            // All-inadmissible: the stop command is the only thing emitted.
            CHECK(cmd == Twist{});
          } else {
            CHECK(nav.last_window().contains(cmd.v, cmd.w));
            const auto it = std::find_if(r.samples.begin(), r.samples.end(),
                                         [&](const DwaSample& x) { return x.v == cmd.v && x.w == cmd.w; });
            REQUIRE(it != r.samples.end());
            CHECK(admissible(cmd.v, cmd.w, it->dist, spec->limits));
          }
        }
      }
      s = step_world(s, cmd, 0.05);
      REQUIRE_FALSE(s.collided);
      const double d = distance(s.pose.position(), task.goal);
      if (task.straight && k > 0) CHECK(d <= prev_dist + 1e-12);
      prev_dist = d;
      if (nav.state().mode == NavMode::GoalReached) break;
    }
    CHECK(nav.state().mode == NavMode::GoalReached);
    CHECK(distance(s.pose.position(), task.goal) <= 0.3);
    CHECK(nav.counters().grid_cell_updates > 0);
    CHECK(nav.counters().plans > 0);
  }
}

TEST_CASE("PGM export") {
  auto grid = unit_grid(3, 2);
  grid.set_log_odds({0, 0}, OccupancyGrid::kClamp);
  grid.set_log_odds({2, 1}, -OccupancyGrid::kClamp);
  const std::string pgm = grid.to_pgm();
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(pgm.size() == header.size() + 6);
  CHECK(pgm.substr(0, header.size()) == header);
  const auto* px = reinterpret_cast<const unsigned char*>(pgm.data() + header.size());
  // Top row is y = 1.
  CHECK(px[0] == 205);
  CHECK(px[2] == 254);
  CHECK(px[3] == 0);
  CHECK(px[4] == 205);
  const auto meta = grid.metadata();
  CHECK(meta["width"] == 3);
  CHECK(meta["resolution"] == 1.0);
}
