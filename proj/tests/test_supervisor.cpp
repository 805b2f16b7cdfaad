#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "atsim/metrics.hpp"
#include "atsim/teleop.hpp"
#include "atsim/trial.hpp"

using namespace atsim;

namespace {

CaseConfig make_cfg(int case_id, int scenario_id, Vec2 goal) {
  CaseConfig c;
  c.case_id = case_id;
  c.scenario_id = scenario_id;
  c.goal = goal;
  return c;
}

std::vector<nlohmann::json> parse_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(nlohmann::json::parse(line));
  return out;
}

std::vector<Vec2> densify(const std::vector<Vec2>& trace) {
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out.push_back(trace[i]);
    out.push_back(i + 1 < trace.size() ? 0.5 * (trace[i] + trace[i + 1]) : trace[i]);
  }
  return out;
}

}  // namespace

TEST_CASE("goal_error examples") {
  CHECK(goal_error({5.5, 0.0, 0.0}, {6.0, 0.0}) == doctest::Approx(0.5));
  CHECK(goal_error({6.0, 0.0, 1.0}, {6.0, 0.0}) == 0.0);

  // Rotating the whole frame leaves the error unchanged.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    const Pose2D p{u(rng), u(rng), 0.0};
    const Vec2 g{u(rng), u(rng)};
    const double a = u(rng);
    const Pose2D frame{0.0, 0.0, a};
    const Vec2 g_rot = start_aligned({g.x, g.y, 0.0}, frame).position();
    CHECK(goal_error(start_aligned(p, frame), g_rot) == doctest::Approx(goal_error(p, g)).epsilon(1e-12));
  }
}

TEST_CASE("start_aligned expresses a pose in the start frame") {
  const Pose2D s = start_aligned({1.0, 2.0, kPi / 2.0}, {1.0, 1.0, kPi / 2.0});
  CHECK(s.x == doctest::Approx(1.0));
  CHECK(s.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.theta == doctest::Approx(0.0));
}

TEST_CASE("tracking_error examples") {
  std::vector<Vec2> m;
  for (int i = 0; i < 50; ++i) m.push_back({0.1 * i, std::sin(0.2 * i)});
  CHECK(tracking_error(m, m) == 0.0);

  std::vector<Vec2> shifted;
  for (const auto& p : m) shifted.push_back({p.x, p.y + 0.5});
  CHECK(tracking_error(m, shifted) == doctest::Approx(0.5));

  CHECK(tracking_error(densify(m), densify(m)) == 0.0);
  CHECK(tracking_error(densify(m), densify(shifted)) == doctest::Approx(0.5));

  CHECK_THROWS_AS(tracking_error(m, std::vector<Vec2>(m.begin(), m.end() - 1)), std::invalid_argument);
  CHECK(tracking_error({}, {}) == 0.0);
}

TEST_CASE("sample_stats uses the population deviation") {
  const auto s = sample_stats({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.stddev == doctest::Approx(std::sqrt(1.25)));
  CHECK(s.min == 1.0);
  CHECK(s.max == 4.0);
  CHECK(s.n == 4);
  CHECK(sample_stats({}).n == 0);
}

TEST_CASE("pursue examples") {
  const OperatorParams p;
  const Twist ahead = pursue({0.0, 0.0, 0.0}, {3.0, 0.0}, 0.4, p);
  CHECK(ahead.v == 0.4);
  CHECK(ahead.w == 0.0);

  const Twist behind = pursue({0.0, 0.0, 0.0}, {-3.0, 0.5}, 0.4, p);
  CHECK(behind.v == 0.0);
  CHECK(behind.w > 0.0);
  CHECK(std::abs(behind.w) <= p.max_turn_rate);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 500; ++i) {
    const Twist t = pursue({u(rng), u(rng), u(rng)}, {u(rng), u(rng)}, 0.4, p);
    CHECK(std::abs(t.w) <= p.max_turn_rate);
    CHECK(t.v >= 0.0);
  }
}

TEST_CASE("scripted operator reaches goals in the empty room") {
  const WorldSpec room = load_scenario(1).master;
  const double dt = 0.05;
  for (const Vec2 goal : {Vec2{6.0, 0.0}, Vec2{6.8, 2.0}, Vec2{-1.0, -3.0}, Vec2{3.0, 2.5}}) {
    CAPTURE(goal.x);
    CAPTURE(goal.y);
    ScriptedOperator op(room, goal);
    WorldState state = WorldState::initial(std::make_shared<const WorldSpec>(room));
    Pose2D oracle = state.pose;
    Twist cmd;
    for (int k = 0; k < 2000 && !op.confirmed(); ++k) {
      if (k % 2 == 0) cmd = op.command(state.pose, state.time);
      state = step_world(state, cmd, dt);
      oracle = integrate_unicycle(oracle, cmd, dt);
      REQUIRE(distance(state.pose.position(), oracle.position()) < 1e-9);
      REQUIRE(!state.collided);
    }
    CHECK(op.confirmed());
    CHECK(distance(state.pose.position(), goal) <= 0.3);
  }
}

TEST_CASE("CaseConfig JSON round trip and validation") {
  CaseConfig c = make_cfg(2, 4, {7.8, -1.8});
  c.gains = {0.5, 2.0};
  c.force.f_th = 1.5;
  c.link.loss_prob = 0.1;
  c.nav.dwa.n_w = 15;
  c.op.cruise_speed = 0.3;
  c.teleop_source = TeleopSource::Console;
  const nlohmann::json j = c;
  const CaseConfig back = j.get<CaseConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.gains.k_w == 2.0);
  CHECK(back.nav.dwa.n_w == 15);

  CHECK_THROWS_AS(nlohmann::json({{"case_idd", 1}}).get<CaseConfig>(), std::invalid_argument);
  CHECK_THROWS_AS(nlohmann::json({{"force", {{"fth", 1}}}}).get<CaseConfig>(), std::invalid_argument);

  CaseConfig bad = make_cfg(0, 1, {6.0, 0.0});
  bad.teleop_source = TeleopSource::Console;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(make_cfg(4, 1, {6.0, 0.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(make_cfg(3, 6, {6.0, 0.0}).validate(), std::invalid_argument);
  CaseConfig no_fb = make_cfg(3, 1, {6.0, 0.0});
  no_fb.mux = {{"channels", {{{"name", "nav"}, {"priority", 10}, {"timeout", 0.3}}}}};
  CHECK_THROWS_AS(no_fb.validate(), std::invalid_argument);
  CHECK_THROWS_AS(Trial{no_fb}, std::invalid_argument);
}

TEST_CASE("zero timeout ends every case immediately") {
  for (int c = 0; c <= 3; ++c) {
    CaseConfig cfg = make_cfg(c, 2, {6.0, 0.0});
    cfg.trial_timeout = 0.0;
    const TrialMetrics m = run_trial(cfg);
    CHECK_FALSE(m.reached);
    CHECK(m.efficiency == 0.0);
    CHECK(m.outcome == TrialOutcome::Timeout);
    CHECK(exit_code(m.outcome) == 2);
  }
}

TEST_CASE("short timeout reports a timeout with efficiency equal to the timeout") {
  CaseConfig cfg = make_cfg(3, 1, {6.0, 0.0});
  cfg.trial_timeout = 5.0;
  const TrialMetrics m = run_trial(cfg);
  CHECK(m.outcome == TrialOutcome::Timeout);
  CHECK_FALSE(m.reached);
  CHECK(m.efficiency == doctest::Approx(5.0));
  CHECK(m.efficiency <= cfg.trial_timeout);
}

TEST_CASE("replay determinism") {
  for (const auto& link : {LinkConfig{}, LinkConfig{LinkBackend::Simulated, 0.02, 0.03, 0.2, 11}}) {
    CaseConfig cfg = make_cfg(3, 2, {7.8, -1.8});
    cfg.link = link;
    cfg.seed = 5;
    std::ostringstream a, b;
    const TrialMetrics ma = run_trial(cfg, &a);
    const TrialMetrics mb = run_trial(cfg, &b);
    CHECK(a.str() == b.str());
    CHECK(nlohmann::json(ma).dump() == nlohmann::json(mb).dump());
    CHECK(a.str().size() > 1000);
  }
}

TEST_CASE("TrialMetrics JSON round trip") {
  const TrialMetrics m = run_trial(make_cfg(3, 2, {7.8, -1.8}));
  const nlohmann::json j = m;
  CHECK(nlohmann::json(j.get<TrialMetrics>()) == j);
}

TEST_CASE("case graphs") {
  SUBCASE("Case 0 has no link traffic") {
    std::ostringstream out;
    const TrialMetrics m = run_trial(make_cfg(0, 2, {7.8, -1.8}), &out);
    CHECK(m.reached);
    CHECK_FALSE(m.has_link);
    CHECK(m.link.client_throughput == 0.0);
    CHECK(m.client_compute.bytes_out == 0);
    CHECK(m.master_compute.work_units() == 0.0);
    CHECK_FALSE(m.tracking_error_mean.has_value());
    for (const auto& ev : parse_lines(out.str())) CHECK(ev.at("ev") != "link");
  }
  SUBCASE("Case 1 streams scans to the remote brain") {
    std::ostringstream out;
    const TrialMetrics m = run_trial(make_cfg(1, 2, {7.8, -1.8}), &out);
    CHECK(m.reached);
    int scans = 0, twists = 0;
    for (const auto& ev : parse_lines(out.str())) {
      if (ev.at("ev") != "link") continue;
      if (ev.at("topic") == "scan") {
        CHECK(ev.at("from") == "client");
        ++scans;
      }
      if (ev.at("topic") == "cmd_vel/nav") {
        CHECK(ev.at("from") == "master");
        ++twists;
      }
    }
    CHECK(scans > 100);
    CHECK(twists == scans);
    CHECK(m.client_compute.grid_cell_updates == 0);
    CHECK(m.master_compute.grid_cell_updates > 0);
  }
  SUBCASE("Case 2 has no feedback path") {
    std::ostringstream out;
    const TrialMetrics m = run_trial(make_cfg(2, 3, {6.8, 2.0}), &out);
    CHECK(m.reached);
    CHECK(m.fb_messages == 0);
    REQUIRE(m.tracking_error_mean.has_value());
    CHECK(*m.tracking_error_mean < 0.1);
    for (const auto& ev : parse_lines(out.str())) {
      if (ev.at("ev") == "link") CHECK(ev.at("topic") != "fb");
    }
  }
}

TEST_CASE("Case 3 sends feedback only when the force crosses the threshold") {
  const CaseConfig cfg = make_cfg(3, 2, {6.8, 2.0});
  std::ostringstream out;
  const TrialMetrics m = run_trial(cfg, &out);
  CHECK(m.reached);
  CHECK(m.fb_messages > 0);

  // Rebuild each Client scan from the logged pose and check the trigger.
  const auto rooms = load_scenario(cfg.scenario_id);
  WorldState probe = WorldState::initial(std::make_shared<const WorldSpec>(rooms.client));
  std::set<double> fb_times;
  std::vector<std::pair<double, Pose2D>> sensor_poses{{0.0, probe.pose}};
  for (const auto& ev : parse_lines(out.str())) {
    if (ev.at("ev") == "link" && ev.at("topic") == "fb") fb_times.insert(ev.at("sent_at").get<double>());
    if (ev.at("ev") == "tick" && (ev.at("k").get<int>() + 1) % 2 == 0) {
      const auto p = ev.at("client");
      sensor_poses.push_back({(ev.at("k").get<int>() + 1) * cfg.dt, {p[0], p[1], p[2]}});
    }
  }
  std::size_t triggered = 0;
  for (const auto& [t, pose] : sensor_poses) {
    probe.time = t;
    probe.tick = std::llround(t / cfg.dt);
    probe.pose = pose;
    const double fmax = compute_force(raycast_scan(probe, pose), cfg.force).max_f;
    if (fb_times.count(t)) {
      CHECK(fmax >= cfg.force.f_th);
      ++triggered;
    } else if (t < m.duration - 1e-9) {
      CHECK(fmax < cfg.force.f_th);
    }
  }
  CHECK(triggered == fb_times.size());
  CHECK(triggered == m.fb_messages);
}

TEST_CASE("Case 3 quiescence in the empty room") {
  for (const Vec2 goal : {Vec2{6.0, 0.0}, Vec2{10.0, 0.0}}) {
    const TrialMetrics m = run_trial(make_cfg(3, 1, goal));
    CHECK(m.reached);
    CHECK(m.fb_messages == 0);
    CHECK(m.client_compute.msgs_out == 0);
  }
}

TEST_CASE("Case 3 coupling identity") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> gain(0.5, 2.0);
  const std::vector<Vec2> goals{{6.8, 2.0}, {7.8, -1.8}, {10.0, 0.0}};
  std::size_t coupled_ticks = 0;
  for (int trial = 0; trial < 4; ++trial) {
    CaseConfig cfg = make_cfg(3, 2 + trial % 3, goals[trial % goals.size()]);
    cfg.gains = {gain(rng), gain(rng)};
    cfg.trial_timeout = 40.0;
    if (trial == 3) cfg.link.loss_prob = 0.2;
    Trial t(cfg);
    while (t.step()) {
      const auto& r = t.last_tick();
      if (!r.client_sel || !r.master_sel) continue;
      if (r.client_sel->channel != "fb" || r.master_sel->channel != "fb") continue;
      // On a lossy link the Master may still hold the previous feedback twist.
      if (r.client_sel->tag != r.master_sel->tag) {
        CHECK(cfg.link.loss_prob > 0.0);
        continue;
      }
      ++coupled_ticks;
      const Twist expected = scale_twist(r.master_sel->twist, cfg.gains);
      CHECK(r.client_sel->twist.v == expected.v);
      CHECK(r.client_sel->twist.w == expected.w);
      CHECK(r.client_sel->twist.vy == expected.vy);
    }
  }
  CHECK(coupled_ticks > 50);
}

TEST_CASE("Case 3 tracks exactly on a clean link and loses track on a lossy one") {
  CaseConfig cfg = make_cfg(3, 2, {6.8, 2.0});
  const TrialMetrics clean = run_trial(cfg);
  REQUIRE(clean.tracking_error_mean.has_value());
  CHECK(*clean.tracking_error_mean == 0.0);
  cfg.link.loss_prob = 0.3;
  const TrialMetrics lossy = run_trial(cfg);
  CHECK(*lossy.tracking_error_mean > 0.0);
  CHECK(lossy.link.client_throughput_loss > 0.0);
}

TEST_CASE("byte dominance: Case 3 Client sends fewer bytes than Case 1") {
  for (int scenario = 1; scenario <= 3; ++scenario) {
    for (const Vec2 goal : {Vec2{6.0, 0.0}, Vec2{6.8, 2.0}}) {
      const TrialMetrics c1 = run_trial(make_cfg(1, scenario, goal));
      const TrialMetrics c3 = run_trial(make_cfg(3, scenario, goal));
      // Case 1 sends one scan per sensor tick; Case 3 only sends on feedback.
      REQUIRE(c1.client_compute.msgs_out / 2 > c3.fb_messages);
      CHECK(c3.client_compute.bytes_out < c1.client_compute.bytes_out);
    }
  }
}

TEST_CASE("transcript structure") {
  std::ostringstream out;
  CaseConfig cfg = make_cfg(2, 1, {6.0, 0.0});
  const TrialMetrics m = run_trial(cfg, &out);
  const auto events = parse_lines(out.str());
  REQUIRE(events.size() > 2);
  CHECK(events.front().at("ev") == "config");
  CHECK(events.front().at("config").get<CaseConfig>().goal.x == 6.0);
  CHECK(events.back().at("ev") == "end");
  CHECK(events.back().at("outcome") == "reached");
  std::int64_t ticks = 0;
  for (const auto& ev : events) {
    if (ev.at("ev") == "tick") {
      CHECK(ev.at("k").get<std::int64_t>() == ticks);
      ++ticks;
    }
  }
  CHECK(static_cast<double>(ticks) * cfg.dt == doctest::Approx(m.duration));
}

TEST_CASE("console source drives the Master and fails safe") {
  CaseConfig cfg = make_cfg(2, 1, {1.0, 0.0});
  cfg.teleop_source = TeleopSource::Console;
  Trial t(cfg);
  for (int k = 0; k < 20; ++k) {
    t.operator_twist({0.3, 0.0, 0.0});
    t.step();
    CHECK(t.last_tick().master_sel.has_value());
  }
  CHECK(t.last_tick().master_pose->x > 0.2);
  // Input stops: the Master halts once the channel times out.
  for (int k = 0; k < 7; ++k) t.step();
  CHECK_FALSE(t.last_tick().master_sel.has_value());
  const double x = t.last_tick().master_pose->x;
  t.step();
  CHECK(t.last_tick().master_pose->x == x);
  CHECK_FALSE(t.finished());
  t.operator_confirm_goal();
  while (t.step()) {
  }
  CHECK(t.metrics().reached);
  CHECK(t.metrics().efficiency < 3.0);
}

TEST_CASE("MUX channel timeout sensitivity") {
  for (double timeout : {0.15, 0.3, 0.6}) {
    CAPTURE(timeout);
    const nlohmann::json mux = {{"channels",
                                 {{{"name", "fb"}, {"priority", kFeedbackPriority}, {"timeout", timeout}},
                                  {{"name", "nav"}, {"priority", kNavPriority}, {"timeout", timeout}}}}};
    for (int c : {2, 3}) {
      CaseConfig cfg = make_cfg(c, 2, {6.8, 2.0});
      cfg.mux = mux;
      const TrialMetrics m = run_trial(cfg);
      CHECK(m.reached);
      CHECK(m.goal_error <= 1.0);
      CHECK(*m.tracking_error_mean < 0.1);
    }
  }
}
