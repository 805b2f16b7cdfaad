#include "atsim/world.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "atsim/kinematics.hpp"

namespace atsim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Obstacle geometry frozen at one instant.
struct Snapshot {
  const WorldSpec* spec;
  std::vector<Rect> rects;
  std::vector<Circle> circles;
};

Snapshot snapshot(const WorldSpec& spec, double time) {
  Snapshot s{&spec, {}, {}};
  for (const auto& o : spec.static_obstacles) {
    if (const auto* r = std::get_if<Rect>(&o)) {
      s.rects.push_back(*r);
    } else {
      s.circles.push_back(std::get<Circle>(o));
    }
  }
  for (const auto& box : spec.dynamic_obstacles) s.rects.push_back(box.footprint_at(time));
  return s;
}

std::optional<double> ray_rect(Vec2 o, Vec2 d, const Rect& r) {
  if (r.contains(o)) return 0.0;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  const double lo[2] = {r.x_min, r.y_min};
  const double hi[2] = {r.x_max, r.y_max};
  const double org[2] = {o.x, o.y};
  const double dir[2] = {d.x, d.y};
  for (int axis = 0; axis < 2; ++axis) {
    if (dir[axis] == 0.0) {
      if (org[axis] < lo[axis] || org[axis] > hi[axis]) return std::nullopt;
      continue;
    }
    double t1 = (lo[axis] - org[axis]) / dir[axis];
    double t2 = (hi[axis] - org[axis]) / dir[axis];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_near > t_far || t_far < 0.0) return std::nullopt;
  return std::max(t_near, 0.0);
}

std::optional<double> ray_circle(Vec2 o, Vec2 d, const Circle& c) {
  const Vec2 oc = o - c.center;
  const double b = dot(d, oc);
  const double cc = dot(oc, oc) - c.radius * c.radius;
  if (cc <= 0.0) return 0.0;
  const double disc = b * b - cc;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t < 0.0) return std::nullopt;
  return t;
}

std::optional<double> ray_walls(Vec2 o, Vec2 d, const Rect& room) {
  if (!room.contains(o)) return 0.0;
  double t = std::numeric_limits<double>::infinity();
  if (d.x > 0.0) t = std::min(t, (room.x_max - o.x) / d.x);
  if (d.x < 0.0) t = std::min(t, (room.x_min - o.x) / d.x);
  if (d.y > 0.0) t = std::min(t, (room.y_max - o.y) / d.y);
  if (d.y < 0.0) t = std::min(t, (room.y_min - o.y) / d.y);
  if (!std::isfinite(t)) return std::nullopt;
  return t;
}

std::optional<double> cast(const Snapshot& s, Vec2 o, Vec2 d) {
  std::optional<double> best;
  auto consider = [&best](std::optional<double> t) {
    if (t && (!best || *t < *best)) best = t;
  };
  if (s.spec->walls) consider(ray_walls(o, d, s.spec->bounds()));
  for (const auto& r : s.rects) consider(ray_rect(o, d, r));
  for (const auto& c : s.circles) consider(ray_circle(o, d, c));
  return best;
}

double point_rect_distance(Vec2 p, const Rect& r) {
  const double dx = std::max({r.x_min - p.x, 0.0, p.x - r.x_max});
  const double dy = std::max({r.y_min - p.y, 0.0, p.y - r.y_max});
  return std::hypot(dx, dy);
}

bool collides(const Snapshot& s, const Pose2D& pose) {
  const double radius = s.spec->robot_footprint_radius;
  const Vec2 p = pose.position();
  if (s.spec->walls) {
    const Rect room = s.spec->bounds();
    if (p.x - radius < room.x_min || p.x + radius > room.x_max || p.y - radius < room.y_min ||
        p.y + radius > room.y_max) {
      return true;
    }
  }
  for (const auto& r : s.rects) {
    if (point_rect_distance(p, r) < radius) return true;
  }
  for (const auto& c : s.circles) {
    if (distance(p, c.center) < c.radius + radius) return true;
  }
  return false;
}

Pose2D advance(const Pose2D& pose, const Twist& cmd, double dt, RobotKind kind) {
  return kind == RobotKind::Omnidirectional ? integrate_omni(pose, cmd, dt)
                                            : integrate_unicycle(pose, cmd, dt);
}

}  // namespace

Vec2 MovingBox::waypoint(std::uint64_t index) const {
  const std::uint64_t h = splitmix64(waypoint_seed ^ splitmix64(index + 0x51ed2701ULL));
  const double u = unit_from_bits(h);
  const double v = unit_from_bits(splitmix64(h));
  const double x_lo = bounds.x_min + half_width;
  const double x_hi = bounds.x_max - half_width;
  const double y_lo = bounds.y_min + half_height;
  const double y_hi = bounds.y_max - half_height;
  return {x_lo + u * (x_hi - x_lo), y_lo + v * (y_hi - y_lo)};
}

Vec2 MovingBox::position_at(double time) const {
  Vec2 from = waypoint(0);
  if (speed <= 0.0 || time <= 0.0) return from;
  double remaining = time;
  for (std::uint64_t k = 1;; ++k) {
    const Vec2 to = waypoint(k);
    const double leg = distance(from, to) / speed;
    if (remaining <= leg) {
      const double s = leg > 0.0 ? remaining / leg : 1.0;
      return from + s * (to - from);
    }
    remaining -= leg;
    from = to;
  }
}

Rect MovingBox::footprint_at(double time) const {
  const Vec2 c = position_at(time);
  return {c.x - half_width, c.y - half_height, c.x + half_width, c.y + half_height};
}

void WorldSpec::validate() const {
  if (!(width > 0.0 && height > 0.0)) throw std::invalid_argument("room size must be positive");
  if (!(robot_footprint_radius > 0.0)) throw std::invalid_argument("footprint radius must be positive");
  limits.validate();
  const Rect room = bounds();
  for (const auto& o : static_obstacles) {
    if (const auto* r = std::get_if<Rect>(&o)) {
      if (!(r->x_max > r->x_min && r->y_max > r->y_min)) throw std::invalid_argument("degenerate rectangle obstacle");
      if (walls && !room.contains(*r)) throw std::invalid_argument("rectangle obstacle outside room");
    } else {
      const auto& c = std::get<Circle>(o);
      if (!(c.radius > 0.0)) throw std::invalid_argument("circle obstacle radius must be positive");
      const Rect hull{c.center.x - c.radius, c.center.y - c.radius, c.center.x + c.radius,
                      c.center.y + c.radius};
      if (walls && !room.contains(hull)) throw std::invalid_argument("circle obstacle outside room");
    }
  }
  for (const auto& box : dynamic_obstacles) {
    if (!(box.half_width > 0.0 && box.half_height > 0.0)) throw std::invalid_argument("moving box must have positive size");
    if (box.speed < 0.0) throw std::invalid_argument("moving box speed must be non-negative");
    if (box.bounds.x_max - box.bounds.x_min < 2.0 * box.half_width ||
        box.bounds.y_max - box.bounds.y_min < 2.0 * box.half_height) {
      throw std::invalid_argument("moving box bounds smaller than the box");
    }
    if (walls && !room.contains(box.bounds)) throw std::invalid_argument("moving box bounds outside room");
  }
  if (check_collision(*this, 0.0, start_pose)) throw std::invalid_argument("start pose is in collision");
}

void ScanParams::validate() const {
  if (n_rays <= 0) throw std::invalid_argument("scan needs at least one ray");
  if (!(angle_span > 0.0 && range_max > 0.0)) throw std::invalid_argument("scan span and range must be positive");
}

WorldState WorldState::initial(std::shared_ptr<const WorldSpec> spec) {
  WorldState s;
  s.pose = spec->start_pose;
  s.pose.theta = wrap_angle(s.pose.theta);
  s.spec = std::move(spec);
  return s;
}

WorldState step_world(WorldState state, const Twist& commanded, double dt) {
  const WorldSpec& spec = *state.spec;
  const Twist cmd = clamp_twist(commanded, spec.limits, spec.robot_kind);
  const double t_end = static_cast<double>(state.tick + 1) * dt;
  const Snapshot obstacles = snapshot(spec, t_end);

  state.twist = cmd;
  if (collides(obstacles, state.pose)) {
    // Something moved into us; stay put.
    state.collided = true;
  } else {
    const Pose2D target = advance(state.pose, cmd, dt, spec.robot_kind);
    if (!collides(obstacles, target)) {
      state.pose = target;
    } else {
      double lo = 0.0;
      double hi = 1.0;
      for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (collides(obstacles, advance(state.pose, cmd, mid * dt, spec.robot_kind))) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      state.pose = advance(state.pose, cmd, lo * dt, spec.robot_kind);
      state.collided = true;
    }
  }
  state.tick += 1;
  state.time = t_end;
  return state;
}

LaserScan raycast_scan(const WorldState& state, const Pose2D& sensor_pose, const ScanParams& params) {
  params.validate();
  const Snapshot s = snapshot(*state.spec, state.time);
  LaserScan scan;
  scan.stamp = state.time;
  scan.angle_min = params.angle_min;
  scan.angle_increment = params.angle_increment();
  scan.range_max = params.range_max;
  scan.ranges.resize(static_cast<std::size_t>(params.n_rays));
  const Vec2 origin = sensor_pose.position();
  for (int i = 0; i < params.n_rays; ++i) {
    const double a = sensor_pose.theta + params.angle_min + i * scan.angle_increment;
    const Vec2 dir{std::cos(a), std::sin(a)};
    const auto hit = cast(s, origin, dir);
    scan.ranges[static_cast<std::size_t>(i)] =
        hit ? std::min(*hit, params.range_max) : params.range_max;
  }
  return scan;
}

bool check_collision(const WorldSpec& spec, double time, const Pose2D& pose) {
  return collides(snapshot(spec, time), pose);
}

bool check_collision(const WorldState& state, const Pose2D& pose) {
  return check_collision(*state.spec, state.time, pose);
}

std::optional<double> ray_hit_distance(const WorldSpec& spec, double time, Vec2 origin,
                                       Vec2 direction) {
  return cast(snapshot(spec, time), origin, (1.0 / norm(direction)) * direction);
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const Pose2D& p) { j = {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }

void from_json(const nlohmann::json& j, Pose2D& p) {
  p.x = j.value("x", 0.0);
  p.y = j.value("y", 0.0);
  p.theta = j.value("theta", 0.0);
}

void to_json(nlohmann::json& j, const VelocityLimits& l) {
  j = {{"v_max", l.v_max}, {"v_min", l.v_min}, {"w_max", l.w_max}, {"accel_v", l.accel_v}, {"accel_w", l.accel_w}};
}

void from_json(const nlohmann::json& j, VelocityLimits& l) {
  const VelocityLimits d;
  l.v_max = j.value("v_max", d.v_max);
  l.v_min = j.value("v_min", d.v_min);
  l.w_max = j.value("w_max", d.w_max);
  l.accel_v = j.value("accel_v", d.accel_v);
  l.accel_w = j.value("accel_w", d.accel_w);
}

void to_json(nlohmann::json& j, const Rect& r) {
  j = {{"x_min", r.x_min}, {"y_min", r.y_min}, {"x_max", r.x_max}, {"y_max", r.y_max}};
}

void from_json(const nlohmann::json& j, Rect& r) {
  r.x_min = j.at("x_min").get<double>();
  r.y_min = j.at("y_min").get<double>();
  r.x_max = j.at("x_max").get<double>();
  r.y_max = j.at("y_max").get<double>();
}

void to_json(nlohmann::json& j, const Obstacle& o) {
  if (const auto* r = std::get_if<Rect>(&o)) {
    j = *r;
    j["type"] = "rect";
  } else {
    const auto& c = std::get<Circle>(o);
    j = {{"type", "circle"}, {"x", c.center.x}, {"y", c.center.y}, {"radius", c.radius}};
  }
}

void from_json(const nlohmann::json& j, Obstacle& o) {
  const auto type = j.at("type").get<std::string>();
  if (type == "rect") {
    o = j.get<Rect>();
  } else if (type == "circle") {
    o = Circle{{j.at("x").get<double>(), j.at("y").get<double>()}, j.at("radius").get<double>()};
  } else {
    throw std::invalid_argument("unknown obstacle type: " + type);
  }
}

void to_json(nlohmann::json& j, const MovingBox& b) {
  j = {{"half_width", b.half_width}, {"half_height", b.half_height}, {"waypoint_seed", b.waypoint_seed},
       {"speed", b.speed}, {"bounds", b.bounds}};
}

void from_json(const nlohmann::json& j, MovingBox& b) {
  const MovingBox d;
  b.half_width = j.value("half_width", d.half_width);
  b.half_height = j.value("half_height", d.half_height);
  b.waypoint_seed = j.value("waypoint_seed", d.waypoint_seed);
  b.speed = j.value("speed", d.speed);
  b.bounds = j.at("bounds").get<Rect>();
}

void to_json(nlohmann::json& j, const WorldSpec& w) {
  j = {{"label", w.label},
       {"width", w.width},
       {"height", w.height},
       {"origin_x", w.origin_x},
       {"origin_y", w.origin_y},
       {"walls", w.walls},
       {"static_obstacles", w.static_obstacles},
       {"dynamic_obstacles", w.dynamic_obstacles},
       {"robot_footprint_radius", w.robot_footprint_radius},
       {"start_pose", w.start_pose},
       {"robot_kind", std::string(to_string(w.robot_kind))},
       {"limits", w.limits}};
}

void from_json(const nlohmann::json& j, WorldSpec& w) {
  const WorldSpec d;
  w.label = j.value("label", d.label);
  w.width = j.value("width", d.width);
  w.height = j.value("height", d.height);
  w.origin_x = j.value("origin_x", d.origin_x);
  w.origin_y = j.value("origin_y", d.origin_y);
  w.walls = j.value("walls", d.walls);
  w.static_obstacles = j.value("static_obstacles", std::vector<Obstacle>{});
  w.dynamic_obstacles = j.value("dynamic_obstacles", std::vector<MovingBox>{});
  w.robot_footprint_radius = j.value("robot_footprint_radius", d.robot_footprint_radius);
  w.start_pose = j.value("start_pose", d.start_pose);
  w.robot_kind = robot_kind_from_string(j.value("robot_kind", std::string("diff_drive")));
  w.limits = j.value("limits", d.limits);
}

}  // namespace atsim
