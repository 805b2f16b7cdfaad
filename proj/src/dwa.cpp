#include "atsim/dwa.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>

#include "atsim/kinematics.hpp"

namespace atsim {

VelocityWindow dynamic_window(const Twist& current, const VelocityLimits& limits, double dt) {
  VelocityWindow win;
  win.v_lo = std::max(current.v - limits.accel_v * dt, limits.v_min);
  win.v_hi = std::min(current.v + limits.accel_v * dt, limits.v_max);
  win.w_lo = std::max(current.w - limits.accel_w * dt, -limits.w_max);
  win.w_hi = std::min(current.w + limits.accel_w * dt, limits.w_max);
  // A current speed outside the limits (e.g. after an override) collapses the
  // window onto the nearest limit.
  if (win.v_lo > win.v_hi) win.v_lo = win.v_hi = std::clamp(current.v, limits.v_min, limits.v_max);
  if (win.w_lo > win.w_hi) win.w_lo = win.w_hi = std::clamp(current.w, -limits.w_max, limits.w_max);
  return win;
}

bool admissible(double v, double w, double dist, const VelocityLimits& limits) {
  return v <= std::sqrt(2.0 * dist * limits.accel_v) && std::abs(w) <= std::sqrt(2.0 * dist * limits.accel_w);
}

std::size_t closest_index(const std::vector<Vec2>& path, Vec2 robot) {
  std::size_t closest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double d = distance(path[i], robot);
    if (d < best) {
      best = d;
      closest = i;
    }
  }
  return closest;
}

Vec2 local_target(const std::vector<Vec2>& path, Vec2 robot, double lookahead) {
  for (std::size_t i = closest_index(path, robot); i < path.size(); ++i) {
    if (distance(path[i], robot) >= lookahead) return path[i];
  }
  return path.back();
}

bool line_clear(const Costmap& costmap, Vec2 a, Vec2 b, double threshold) {
  const double len = distance(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil(len / (0.5 * costmap.grid().resolution()))));
  for (int i = 1; i <= n; ++i) {
    if (costmap.distance_at(a + (static_cast<double>(i) / n) * (b - a)) < threshold) return false;
  }
  return true;
}

Vec2 visible_target(const Costmap& costmap, const std::vector<Vec2>& path, Vec2 robot,
                    double lookahead, double threshold) {
  // Points closer than this give no usable bearing.
  constexpr double kMinTargetDistance = 0.3;
  const std::size_t closest = closest_index(path, robot);
  std::optional<Vec2> target;
  for (std::size_t i = closest; i < path.size(); ++i) {
    const double d = distance(path[i], robot);
    if (!line_clear(costmap, robot, path[i], threshold)) {
      if (target && distance(*target, robot) >= kMinTargetDistance) break;
      continue;
    }
    target = path[i];
    if (d >= lookahead) break;
  }
  if (!target || (distance(*target, robot) < kMinTargetDistance && distance(path.back(), robot) >= kMinTargetDistance)) {
    return local_target(path, robot, lookahead);
  }
  return *target;
}

namespace {

double lattice(double lo, double hi, int i, int n) {
  if (n <= 1) return 0.5 * (lo + hi);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double c = 0.5 * (n - 1);
  return mid + half * (i - c) / c;
}

}  // namespace

DwaResult dwa_step(const Costmap& costmap, double footprint_radius, const Pose2D& pose,
                   const Twist& current, const std::vector<Vec2>& path,
                   const VelocityLimits& limits, double dt, const DwaParams& params) {
  if (path.empty()) throw std::invalid_argument("dwa_step needs a non-empty path");
  const VelocityWindow win = dynamic_window(current, limits, dt);
  const int steps = static_cast<int>(std::lround(params.sim_time / params.sim_step));

  // If the robot is already inside the margin, only forbid getting closer.
  const double start_clear = costmap.distance_at(pose.position());
  const double threshold = std::min(footprint_radius + params.collision_margin,
                                    std::max(footprint_radius, start_clear - 1e-9));
  const bool stuck = start_clear <= footprint_radius;
  const Vec2 target = visible_target(costmap, path, pose.position(), params.lookahead, threshold);

  DwaResult out;
  out.samples.reserve(static_cast<std::size_t>(params.n_v * params.n_w));
  const DwaSample* best = nullptr;
  bool any_motion = false;
  for (int iv = 0; iv < params.n_v; ++iv) {
    const double v = lattice(win.v_lo, win.v_hi, iv, params.n_v);
    for (int iw = 0; iw < params.n_w; ++iw) {
      const double w = lattice(win.w_lo, win.w_hi, iw, params.n_w);
      DwaSample s{v, w};
      double min_clear = start_clear;
      Pose2D p = pose;
      if (stuck) {
        s.dist = 0.0;
      } else {
        s.dist = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= steps; ++k) {
          p = integrate_unicycle(p, {v, 0.0, w}, params.sim_step);
          ++out.arc_steps;
          const double c = costmap.distance_at(p.position());
          min_clear = std::min(min_clear, c);
          if (c < threshold) {
            s.dist = std::abs(v) * (k - 1) * params.sim_step;
            break;
          }
        }
      }
      s.admissible = admissible(v, w, s.dist, limits);
      if (s.admissible && !(v == 0.0 && w == 0.0)) any_motion = true;
      if (s.admissible) {
        const double bearing = std::atan2(target.y - p.y, target.x - p.x);
        s.heading = 1.0 - std::abs(wrap_angle(bearing - p.theta)) / kPi;
        s.clearance = std::clamp(min_clear - footprint_radius, 0.0, params.clearance_cap) / params.clearance_cap;
        const double vel = limits.v_max > 0.0 ? v / limits.v_max : 0.0;
        s.score = params.alpha * s.heading + params.beta * s.clearance + params.gamma * vel;
      }
      out.samples.push_back(s);
    }
  }
  if (!any_motion) {
    out.recovery = true;
    return out;
  }
  for (const auto& s : out.samples) {
    if (!s.admissible) continue;
    if (!best || s.score > best->score ||
        (s.score == best->score && (s.v > best->v || (s.v == best->v && std::abs(s.w) < std::abs(best->w))))) {
      best = &s;
    }
  }
  out.twist = {best->v, 0.0, best->w};
  return out;
}

}  // namespace atsim
