#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "atsim/types.hpp"

namespace atsim {

/// Axis-aligned rectangle in world coordinates.
struct Rect {
  double x_min{0.0};
  double y_min{0.0};
  double x_max{0.0};
  double y_max{0.0};

  bool contains(Vec2 p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
  bool contains(const Rect& r) const {
    return r.x_min >= x_min && r.x_max <= x_max && r.y_min >= y_min && r.y_max <= y_max;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Circle {
  Vec2 center;
  double radius{0.0};
  friend bool operator==(const Circle&, const Circle&) = default;
};

using Obstacle = std::variant<Rect, Circle>;

/// A box that roams its bounds along seeded random waypoints. Its position is
/// a pure function of (waypoint_seed, time).
struct MovingBox {
  double half_width{0.2};
  double half_height{0.2};
  std::uint64_t waypoint_seed{0};
  double speed{0.15};
  Rect bounds;

  Vec2 waypoint(std::uint64_t index) const;
  Vec2 position_at(double time) const;
  Rect footprint_at(double time) const;
  friend bool operator==(const MovingBox&, const MovingBox&) = default;
};

struct WorldSpec {
  std::string label;
  double width{17.0};
  double height{8.0};
  // Lower-left room corner in the world frame. Rooms are laid out so the robot
  // starts at the world origin.
  double origin_x{-1.5};
  double origin_y{-4.0};
  // When false the room has no boundary walls (used by unit tests).
  bool walls{true};
  std::vector<Obstacle> static_obstacles;
  std::vector<MovingBox> dynamic_obstacles;
  double robot_footprint_radius{0.18};
  Pose2D start_pose;
  RobotKind robot_kind{RobotKind::DifferentialDrive};
  VelocityLimits limits;

  Rect bounds() const { return {origin_x, origin_y, origin_x + width, origin_y + height}; }
  std::size_t obstacle_count() const { return static_obstacles.size() + dynamic_obstacles.size(); }
  void validate() const;
  friend bool operator==(const WorldSpec&, const WorldSpec&) = default;
};

struct ScanParams {
  int n_rays{360};
  double angle_min{-kPi};
  double angle_span{kTwoPi};
  double range_max{5.0};

  double angle_increment() const { return angle_span / n_rays; }
  void validate() const;
};

struct LaserScan {
  double stamp{0.0};
  double angle_min{0.0};
  double angle_increment{0.0};
  double range_max{0.0};
  std::vector<double> ranges;

  /// Ray bearing relative to the robot heading, wrapped to (-pi, pi].
  double bearing(std::size_t index) const {
    return wrap_angle(angle_min + static_cast<double>(index) * angle_increment);
  }
  std::size_t size() const { return ranges.size(); }
};

struct WorldState {
  std::shared_ptr<const WorldSpec> spec;
  Pose2D pose;
  Twist twist;  // last applied (clamped) command
  std::int64_t tick{0};
  double time{0.0};
  bool collided{false};

  static WorldState initial(std::shared_ptr<const WorldSpec> spec);
};

/// Fixed physics step. Commands are clamped to the actuator limits; on contact
/// the robot stops at the last collision-free point and `collided` latches.
WorldState step_world(WorldState state, const Twist& commanded, double dt);

/// Exact continuous ray casting against walls, static and moving obstacles.
LaserScan raycast_scan(const WorldState& state, const Pose2D& sensor_pose,
                       const ScanParams& params = {});

/// True iff the footprint disc at `pose` touches an obstacle or leaves the room.
bool check_collision(const WorldState& state, const Pose2D& pose);
bool check_collision(const WorldSpec& spec, double time, const Pose2D& pose);

/// Distance along a ray to the first hit, or nullopt.
std::optional<double> ray_hit_distance(const WorldSpec& spec, double time, Vec2 origin,
                                       Vec2 direction);

struct ScenarioPair {
  WorldSpec master;
  WorldSpec client;
};

inline constexpr int kScenarioCount = 5;

/// Built-in room layouts for scenarios 1..5. `overrides` is a JSON merge patch
/// applied to the Client room.
ScenarioPair load_scenario(int scenario_id, const nlohmann::json& overrides = nullptr);

/// Same as load_scenario but reads the Client room from a catalog file
/// `<dir>/<id>.json` when present.
ScenarioPair load_scenario_from_catalog(int scenario_id, const std::string& catalog_dir,
                                        const nlohmann::json& overrides = nullptr);

/// `{"id": n, "master": WorldSpec, "client": WorldSpec}` for the built-in layout.
nlohmann::json scenario_document(int scenario_id);

void to_json(nlohmann::json& j, const Rect& r);
void from_json(const nlohmann::json& j, Rect& r);
void to_json(nlohmann::json& j, const Obstacle& o);
void from_json(const nlohmann::json& j, Obstacle& o);
void to_json(nlohmann::json& j, const MovingBox& b);
void from_json(const nlohmann::json& j, MovingBox& b);
void to_json(nlohmann::json& j, const WorldSpec& w);
void from_json(const nlohmann::json& j, WorldSpec& w);
void to_json(nlohmann::json& j, const Pose2D& p);
void from_json(const nlohmann::json& j, Pose2D& p);
void to_json(nlohmann::json& j, const VelocityLimits& l);
void from_json(const nlohmann::json& j, VelocityLimits& l);

}  // namespace atsim
