#include <fstream>
#include <stdexcept>
#include <string>

#include "atsim/world.hpp"

// Room layouts are reconstructions: the reference figures show the rooms but
// give no dimensions, so positions below were chosen to put some obstacles on
// or near the straight lines to the default goals and keep every goal at
// least 1 m from any obstacle.

namespace atsim {

namespace {

Obstacle circle(double x, double y, double r) { return Circle{{x, y}, r}; }
Obstacle rect(double x0, double y0, double x1, double y1) { return Rect{x0, y0, x1, y1}; }

std::vector<Obstacle> sparse_layout() {
  return {
      circle(3.0, 1.2, 0.35),
      rect(4.2, -2.6, 4.8, -1.9),
      circle(5.0, 0.9, 0.3),
      rect(7.0, -0.6, 7.5, -0.1),
      circle(11.5, 2.0, 0.4),
      rect(1.5, -3.2, 2.3, -2.6),
  };
}

std::vector<Obstacle> dense_layout() {
  auto obstacles = sparse_layout();
  const std::vector<Obstacle> extra{
      circle(2.2, -0.9, 0.25),
      rect(3.6, 2.3, 4.3, 2.9),
      circle(6.0, -1.2, 0.3),
      rect(8.5, -0.6, 9.0, 0.3),
      circle(9.5, -2.6, 0.35),
      rect(5.6, 2.9, 6.3, 3.5),
      circle(12.5, -1.0, 0.4),
      rect(10.5, 2.6, 11.2, 3.3),
  };
  obstacles.insert(obstacles.end(), extra.begin(), extra.end());
  return obstacles;
}

std::vector<MovingBox> moving_boxes() {
  MovingBox a;
  a.waypoint_seed = 0x4a11ce;
  a.bounds = {2.5, -3.5, 5.5, -0.6};
  MovingBox b;
  b.waypoint_seed = 0xb0b;
  b.bounds = {11.0, -3.5, 14.5, 3.5};
  return {a, b};
}

WorldSpec builtin_client(int scenario_id) {
  WorldSpec w;
  switch (scenario_id) {
    case 1:
      w.label = "empty";
      break;
    case 2:
      w.label = "sparse (reconstruction)";
      w.static_obstacles = sparse_layout();
      break;
    case 3:
      w.label = "dense (reconstruction)";
      w.static_obstacles = dense_layout();
      break;
    case 4:
      w.label = "sparse + moving boxes (reconstruction)";
      w.static_obstacles = sparse_layout();
      w.dynamic_obstacles = moving_boxes();
      break;
    case 5:
      w.label = "sparse, omnidirectional client (reconstruction)";
      w.static_obstacles = sparse_layout();
      w.robot_kind = RobotKind::Omnidirectional;
      break;
    default:
      throw std::out_of_range("unknown scenario id " + std::to_string(scenario_id));
  }
  return w;
}

WorldSpec empty_master() {
  WorldSpec w;
  w.label = "master (empty)";
  return w;
}

ScenarioPair finish(WorldSpec master, WorldSpec client, const nlohmann::json& overrides) {
  if (!overrides.is_null()) {
    nlohmann::json patched = client;
    patched.merge_patch(overrides);
    client = patched.get<WorldSpec>();
  }
  master.validate();
  client.validate();
  return {std::move(master), std::move(client)};
}

}  // namespace

ScenarioPair load_scenario(int scenario_id, const nlohmann::json& overrides) {
  return finish(empty_master(), builtin_client(scenario_id), overrides);
}

ScenarioPair load_scenario_from_catalog(int scenario_id, const std::string& catalog_dir,
                                        const nlohmann::json& overrides) {
  if (scenario_id < 1 || scenario_id > kScenarioCount) {
    throw std::out_of_range("unknown scenario id " + std::to_string(scenario_id));
  }
  std::ifstream in(catalog_dir + "/" + std::to_string(scenario_id) + ".json");
  if (!in) return load_scenario(scenario_id, overrides);
  const auto doc = nlohmann::json::parse(in);
  return finish(doc.at("master").get<WorldSpec>(), doc.at("client").get<WorldSpec>(), overrides);
}

nlohmann::json scenario_document(int scenario_id) {
  const auto pair = load_scenario(scenario_id);
  return {{"id", scenario_id}, {"master", pair.master}, {"client", pair.client}};
}

}  // namespace atsim
