#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "atsim/kinematics.hpp"
#include "atsim/link.hpp"
#include "atsim/navigator.hpp"
#include "atsim/predictive_force.hpp"
#include "atsim/teleop.hpp"
#include "atsim/vel_mux.hpp"
#include "atsim/world.hpp"

namespace atsim {

enum class TeleopSource { Scripted, Console };

/// One experiment run: which case, which rooms, and every tunable.
struct CaseConfig {
  int case_id{3};
  int scenario_id{1};
  /// Goal in the Master/autonomy frame; the Client is judged at the same
  /// coordinates of its own start-aligned frame.
  Vec2 goal{6.0, 0.0};
  CouplingGains gains;
  ForceParams force;
  LinkConfig link;
  std::uint64_t seed{0};
  double trial_timeout{300.0};
  TeleopSource teleop_source{TeleopSource::Scripted};
  /// The Master also executes the feedback twist (both robots halt and turn).
  bool master_applies_feedback{true};
  double dt{0.05};
  NavParams nav;
  OperatorParams op;
  /// JSON merge patch applied to the Client room.
  nlohmann::json scenario_overrides;
  /// Directory with <id>.json room files; empty uses the built-in layouts.
  std::string scenario_dir;
  /// MUX channel block `{"channels":[...]}`; null uses fb(100) over nav(10).
  nlohmann::json mux;
  /// Time the robots keep running after the goal event so in-flight traffic lands.
  double settle_time{0.5};

  /// Throws std::invalid_argument on an inconsistent config.
  void validate() const;
};

void to_json(nlohmann::json& j, const CaseConfig& c);
/// Missing fields keep their defaults; unknown top-level keys are rejected.
void from_json(const nlohmann::json& j, CaseConfig& c);

/// Deterministic work units accumulated by one node (primary compute proxy).
struct NodeCompute {
  std::uint64_t scans{0};
  std::uint64_t grid_cell_updates{0};
  std::uint64_t plans{0};
  std::uint64_t astar_expanded{0};
  std::uint64_t dwa_samples{0};
  std::uint64_t dwa_arc_steps{0};
  std::uint64_t force_rays{0};
  std::uint64_t msgs_in{0};
  std::uint64_t msgs_out{0};
  std::uint64_t bytes_in{0};
  std::uint64_t bytes_out{0};

  /// Weighted sum: one unit per cell update, A* expansion, DWA arc step and
  /// force ray; a quarter unit per byte serialized or parsed.
  double work_units() const;
};

void to_json(nlohmann::json& j, const NodeCompute& c);

enum class TrialOutcome { Reached, Timeout, Collision };

std::string_view to_string(TrialOutcome outcome);
/// CLI exit code: 0 reached, 2 timeout, 3 collision.
int exit_code(TrialOutcome outcome);

struct TrialMetrics {
  int case_id{0};
  int scenario_id{0};
  std::uint64_t seed{0};
  Vec2 goal;
  TrialOutcome outcome{TrialOutcome::Timeout};
  bool reached{false};
  bool collision{false};
  double goal_error{0.0};
  /// Only cases with a Master robot (2 and 3) have a trajectory to track.
  std::optional<double> tracking_error_mean;
  /// Time of the goal event when reached, trial end otherwise.
  double efficiency{0.0};
  double duration{0.0};
  LinkSummary link;
  bool has_link{false};
  std::uint64_t fb_messages{0};
  NodeCompute client_compute;
  NodeCompute master_compute;
  Pose2D client_final;
  std::optional<Pose2D> master_final;
};

void to_json(nlohmann::json& j, const TrialMetrics& m);
void from_json(const nlohmann::json& j, TrialMetrics& m);

/// Live state pushed to the console.
struct TrialView {
  double time{0.0};
  Pose2D master_pose;
  std::vector<double> master_scan;
  double scan_angle_min{0.0};
  double scan_angle_increment{0.0};
  double scan_range_max{0.0};
  double fmax{0.0};
  double f_th{0.0};
  double tracking_error{0.0};
  double goal_distance{0.0};
  std::string mode;
  /// Running link averages since the start; nullopt before the first pong.
  std::optional<double> latency;
  double throughput_client{0.0};
};

/// Master and Client MUX picks of one tick, for auditing.
struct TickRecord {
  std::int64_t tick{0};
  double time{0.0};
  Pose2D client_pose;
  std::optional<Pose2D> master_pose;
  std::optional<MuxSelection> client_sel;
  std::optional<MuxSelection> master_sel;
};

/// A trial on the virtual-time event loop. Each step() runs
/// sensors -> link -> nodes -> MUX select -> world step for both robots.
class Trial {
 public:
  /// Builds the case's node graph. A Simulated link is created from the config
  /// unless `link` is supplied; Case 0 never has a link.
  explicit Trial(CaseConfig cfg, std::unique_ptr<Link> link = nullptr);
  ~Trial();
  Trial(const Trial&) = delete;
  Trial& operator=(const Trial&) = delete;

  /// Advances one dt. Returns false once the trial has ended.
  bool step();
  bool finished() const;
  double time() const;

  /// Operator input (Console source). Safe to call between steps only.
  void operator_twist(const Twist& twist);
  void operator_confirm_goal();
  /// Console presence. While absent in Case 3 the Master commands a zero twist
  /// instead of its planner output; in Case 2 the "nav" channel simply expires.
  void set_operator_present(bool present);

  /// Final metrics; drains the simulated link. Call after finished().
  TrialMetrics metrics();
  TrialView view() const;
  const TickRecord& last_tick() const;
  /// Room the operator sees: the Master's in Cases 2 and 3.
  const WorldSpec& master_room() const;
  const CaseConfig& config() const;

  /// Newline-delimited JSON event log (config, ticks, link events, end).
  void set_transcript(std::ostream* out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Runs to completion. Writes the transcript when `transcript` is given.
TrialMetrics run_trial(const CaseConfig& cfg, std::ostream* transcript = nullptr);

}  // namespace atsim
