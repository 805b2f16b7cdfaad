#include "atsim/trial.hpp"

#include <deque>
#include <map>
#include <set>
#include <stdexcept>

#include "atsim/metrics.hpp"

namespace atsim {

namespace {

constexpr double kByteWeight = 0.25;

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const char* where) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw std::invalid_argument(std::string("unknown key '") + item.key() + "' in " + where);
    }
  }
}

nlohmann::json to_json_force(const ForceParams& f) {
  return {{"r_o", f.r_o},           {"k", f.k},           {"f_th", f.f_th},
          {"w_turn", f.w_turn},     {"v_nominal", f.v_nominal}, {"d_stop", f.d_stop},
          {"k_safe", f.k_safe},     {"law", to_string(f.law)}};
}

ForceParams force_from_json(const nlohmann::json& j) {
  check_keys(j, {"r_o", "k", "f_th", "w_turn", "v_nominal", "d_stop", "k_safe", "law"}, "force");
  ForceParams f;
  f.r_o = j.value("r_o", f.r_o);
  f.k = j.value("k", f.k);
  f.f_th = j.value("f_th", f.f_th);
  f.w_turn = j.value("w_turn", f.w_turn);
  f.v_nominal = j.value("v_nominal", f.v_nominal);
  f.d_stop = j.value("d_stop", f.d_stop);
  f.k_safe = j.value("k_safe", f.k_safe);
  if (j.contains("law")) f.law = force_law_from_string(j.at("law").get<std::string>());
  return f;
}

nlohmann::json to_json_nav(const NavParams& n) {
  const auto& d = n.dwa;
  return {{"goal_tolerance", n.goal_tolerance},
          {"replan_period", n.replan_period},
          {"inflation_margin", n.inflation_margin},
          {"recovery_w", n.recovery_w},
          {"no_path_timeout", n.no_path_timeout},
          {"unknown_cost_factor", n.planner.unknown_cost_factor},
          {"dwa",
           {{"n_v", d.n_v},
            {"n_w", d.n_w},
            {"sim_time", d.sim_time},
            {"sim_step", d.sim_step},
            {"alpha", d.alpha},
            {"beta", d.beta},
            {"gamma", d.gamma},
            {"clearance_cap", d.clearance_cap},
            {"collision_margin", d.collision_margin},
            {"lookahead", d.lookahead}}}};
}

NavParams nav_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"goal_tolerance", "replan_period", "inflation_margin", "recovery_w", "no_path_timeout",
              "unknown_cost_factor", "dwa"},
             "nav");
  NavParams n;
  n.goal_tolerance = j.value("goal_tolerance", n.goal_tolerance);
  n.replan_period = j.value("replan_period", n.replan_period);
  n.inflation_margin = j.value("inflation_margin", n.inflation_margin);
  n.recovery_w = j.value("recovery_w", n.recovery_w);
  n.no_path_timeout = j.value("no_path_timeout", n.no_path_timeout);
  n.planner.unknown_cost_factor = j.value("unknown_cost_factor", n.planner.unknown_cost_factor);
  if (j.contains("dwa")) {
    const auto& d = j.at("dwa");
    check_keys(d,
               {"n_v", "n_w", "sim_time", "sim_step", "alpha", "beta", "gamma", "clearance_cap",
                "collision_margin", "lookahead"},
               "nav.dwa");
    auto& p = n.dwa;
    p.n_v = d.value("n_v", p.n_v);
    p.n_w = d.value("n_w", p.n_w);
    p.sim_time = d.value("sim_time", p.sim_time);
    p.sim_step = d.value("sim_step", p.sim_step);
    p.alpha = d.value("alpha", p.alpha);
    p.beta = d.value("beta", p.beta);
    p.gamma = d.value("gamma", p.gamma);
    p.clearance_cap = d.value("clearance_cap", p.clearance_cap);
    p.collision_margin = d.value("collision_margin", p.collision_margin);
    p.lookahead = d.value("lookahead", p.lookahead);
  }
  return n;
}

nlohmann::json to_json_operator(const OperatorParams& o) {
  return {{"cruise_speed", o.cruise_speed},   {"max_turn_rate", o.max_turn_rate},
          {"lookahead", o.lookahead},         {"turn_in_place", o.turn_in_place},
          {"stop_distance", o.stop_distance}, {"replan_period", o.replan_period},
          {"wait_distance", o.wait_distance}};
}

OperatorParams operator_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"cruise_speed", "max_turn_rate", "lookahead", "turn_in_place", "stop_distance",
              "replan_period", "wait_distance"},
             "operator");
  OperatorParams o;
  o.cruise_speed = j.value("cruise_speed", o.cruise_speed);
  o.max_turn_rate = j.value("max_turn_rate", o.max_turn_rate);
  o.lookahead = j.value("lookahead", o.lookahead);
  o.turn_in_place = j.value("turn_in_place", o.turn_in_place);
  o.stop_distance = j.value("stop_distance", o.stop_distance);
  o.replan_period = j.value("replan_period", o.replan_period);
  o.wait_distance = j.value("wait_distance", o.wait_distance);
  return o;
}

nlohmann::json pose_array(const Pose2D& p) { return {p.x, p.y, p.theta}; }

nlohmann::json selection_json(const std::optional<MuxSelection>& sel) {
  if (!sel) return nullptr;
  nlohmann::json j = {{"ch", sel->channel}, {"v", sel->twist.v}, {"vy", sel->twist.vy}, {"w", sel->twist.w}};
  if (sel->tag) j["tag"] = *sel->tag;
  return j;
}

VelocityMux make_mux(const nlohmann::json& cfg) {
  return cfg.is_null() ? VelocityMux::standard() : VelocityMux::from_json(cfg);
}

struct Robot {
  std::shared_ptr<const WorldSpec> spec;
  WorldState state;
  VelocityMux mux;
  std::optional<LaserScan> scan;
  std::vector<Vec2> trace;
};

Robot make_robot(const WorldSpec& spec, const nlohmann::json& mux) {
  Robot r;
  r.spec = std::make_shared<const WorldSpec>(spec);
  r.state = WorldState::initial(r.spec);
  r.mux = make_mux(mux);
  return r;
}

void add_nav_counters(NodeCompute& c, const NavCounters& n) {
  c.scans += n.scans;
  c.grid_cell_updates += n.grid_cell_updates;
  c.plans += n.plans;
  c.astar_expanded += n.astar_expanded;
  c.dwa_samples += n.dwa_samples;
  c.dwa_arc_steps += n.dwa_arc_steps;
}

}  // namespace

void CaseConfig::validate() const {
  if (case_id < 0 || case_id > 3) throw std::invalid_argument("case_id must be 0..3");
  if (scenario_id < 1 || scenario_id > kScenarioCount) throw std::invalid_argument("scenario_id must be 1..5");
  if (!(trial_timeout >= 0.0)) throw std::invalid_argument("trial_timeout must be >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(settle_time >= 0.0)) throw std::invalid_argument("settle_time must be >= 0");
  if (!std::isfinite(goal.x) || !std::isfinite(goal.y)) throw std::invalid_argument("goal must be finite");
  if (teleop_source == TeleopSource::Console && case_id != 2 && case_id != 3) {
    throw std::invalid_argument("console teleop needs case 2 or 3");
  }
  gains.validate();
  force.validate();
  link.validate();
  const auto mux_check = make_mux(mux);
  if (!mux_check.has_channel("nav") || !mux_check.has_channel("fb")) {
    throw std::invalid_argument("mux config needs 'nav' and 'fb' channels");
  }
}

void to_json(nlohmann::json& j, const CaseConfig& c) {
  j = {{"case_id", c.case_id},
       {"scenario_id", c.scenario_id},
       {"goal", {c.goal.x, c.goal.y}},
       {"gains", {{"k_v", c.gains.k_v}, {"k_w", c.gains.k_w}}},
       {"force", to_json_force(c.force)},
       {"link", c.link},
       {"seed", c.seed},
       {"trial_timeout", c.trial_timeout},
       {"teleop_source", c.teleop_source == TeleopSource::Console ? "console" : "scripted"},
       {"master_applies_feedback", c.master_applies_feedback},
       {"dt", c.dt},
       {"nav", to_json_nav(c.nav)},
       {"operator", to_json_operator(c.op)},
       {"scenario_overrides", c.scenario_overrides},
       {"scenario_dir", c.scenario_dir},
       {"mux", c.mux},
       {"settle_time", c.settle_time}};
}

void from_json(const nlohmann::json& j, CaseConfig& c) {
  check_keys(j,
             {"case_id", "scenario_id", "goal", "gains", "force", "link", "seed", "trial_timeout",
              "teleop_source", "master_applies_feedback", "dt", "nav", "operator", "scenario_overrides",
              "scenario_dir", "mux", "settle_time"},
             "trial config");
  CaseConfig d;
  d.case_id = j.value("case_id", d.case_id);
  d.scenario_id = j.value("scenario_id", d.scenario_id);
  if (j.contains("goal")) {
    const auto g = j.at("goal").get<std::vector<double>>();
    if (g.size() != 2) throw std::invalid_argument("goal must be [x, y]");
    d.goal = {g[0], g[1]};
  }
  if (j.contains("gains")) {
    check_keys(j.at("gains"), {"k_v", "k_w"}, "gains");
    d.gains.k_v = j.at("gains").value("k_v", d.gains.k_v);
    d.gains.k_w = j.at("gains").value("k_w", d.gains.k_w);
  }
  if (j.contains("force")) d.force = force_from_json(j.at("force"));
  if (j.contains("link")) d.link = j.at("link").get<LinkConfig>();
  d.seed = j.value("seed", d.seed);
  d.trial_timeout = j.value("trial_timeout", d.trial_timeout);
  const std::string source = j.value("teleop_source", std::string("scripted"));
  if (source == "scripted") d.teleop_source = TeleopSource::Scripted;
  else if (source == "console") d.teleop_source = TeleopSource::Console;
  else throw std::invalid_argument("teleop_source must be 'scripted' or 'console'");
  d.master_applies_feedback = j.value("master_applies_feedback", d.master_applies_feedback);
  d.dt = j.value("dt", d.dt);
  if (j.contains("nav")) d.nav = nav_from_json(j.at("nav"));
  if (j.contains("operator")) d.op = operator_from_json(j.at("operator"));
  if (j.contains("scenario_overrides")) d.scenario_overrides = j.at("scenario_overrides");
  d.scenario_dir = j.value("scenario_dir", d.scenario_dir);
  if (j.contains("mux")) d.mux = j.at("mux");
  d.settle_time = j.value("settle_time", d.settle_time);
  c = std::move(d);
}

double NodeCompute::work_units() const {
  return static_cast<double>(grid_cell_updates + astar_expanded + dwa_arc_steps + force_rays) +
         kByteWeight * static_cast<double>(bytes_in + bytes_out);
}

void to_json(nlohmann::json& j, const NodeCompute& c) {
  j = {{"work_units", c.work_units()},
       {"scans", c.scans},
       {"grid_cell_updates", c.grid_cell_updates},
       {"plans", c.plans},
       {"astar_expanded", c.astar_expanded},
       {"dwa_samples", c.dwa_samples},
       {"dwa_arc_steps", c.dwa_arc_steps},
       {"force_rays", c.force_rays},
       {"msgs_in", c.msgs_in},
       {"msgs_out", c.msgs_out},
       {"bytes_in", c.bytes_in},
       {"bytes_out", c.bytes_out}};
}

static void from_json_compute(const nlohmann::json& j, NodeCompute& c) {
  c.scans = j.value("scans", std::uint64_t{0});
  c.grid_cell_updates = j.value("grid_cell_updates", std::uint64_t{0});
  c.plans = j.value("plans", std::uint64_t{0});
  c.astar_expanded = j.value("astar_expanded", std::uint64_t{0});
  c.dwa_samples = j.value("dwa_samples", std::uint64_t{0});
  c.dwa_arc_steps = j.value("dwa_arc_steps", std::uint64_t{0});
  c.force_rays = j.value("force_rays", std::uint64_t{0});
  c.msgs_in = j.value("msgs_in", std::uint64_t{0});
  c.msgs_out = j.value("msgs_out", std::uint64_t{0});
  c.bytes_in = j.value("bytes_in", std::uint64_t{0});
  c.bytes_out = j.value("bytes_out", std::uint64_t{0});
}

std::string_view to_string(TrialOutcome outcome) {
  switch (outcome) {
    case TrialOutcome::Reached: return "reached";
    case TrialOutcome::Timeout: return "timeout";
    case TrialOutcome::Collision: return "collision";
  }
  return "timeout";
}

int exit_code(TrialOutcome outcome) {
  switch (outcome) {
    case TrialOutcome::Reached: return 0;
    case TrialOutcome::Timeout: return 2;
    case TrialOutcome::Collision: return 3;
  }
  return 2;
}

void to_json(nlohmann::json& j, const TrialMetrics& m) {
  j = {{"case_id", m.case_id},
       {"scenario_id", m.scenario_id},
       {"seed", m.seed},
       {"goal", {m.goal.x, m.goal.y}},
       {"outcome", to_string(m.outcome)},
       {"reached", m.reached},
       {"collision", m.collision},
       {"goal_error", m.goal_error},
       {"tracking_error_mean", m.tracking_error_mean ? nlohmann::json(*m.tracking_error_mean) : nullptr},
       {"efficiency", m.efficiency},
       {"duration", m.duration},
       {"has_link", m.has_link},
       {"throughput_avg", {{"master", m.link.master_throughput}, {"client", m.link.client_throughput}}},
       {"throughput_loss",
        {{"master", m.link.master_throughput_loss}, {"client", m.link.client_throughput_loss}}},
       {"latency_avg", m.has_link ? nlohmann::json(m.link.latency_avg) : nullptr},
       {"msgs_dropped", m.link.msgs_dropped},
       {"fb_messages", m.fb_messages},
       {"compute_proxy", {{"client", m.client_compute}, {"master", m.master_compute}}},
       {"client_final", pose_array(m.client_final)},
       {"master_final", m.master_final ? pose_array(*m.master_final) : nullptr}};
}

void from_json(const nlohmann::json& j, TrialMetrics& m) {
  m = {};
  m.case_id = j.at("case_id").get<int>();
  m.scenario_id = j.at("scenario_id").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto g = j.at("goal").get<std::vector<double>>();
  m.goal = {g.at(0), g.at(1)};
  const std::string outcome = j.at("outcome");
  m.outcome = outcome == "reached" ? TrialOutcome::Reached
              : outcome == "collision" ? TrialOutcome::Collision
                                       : TrialOutcome::Timeout;
  m.reached = j.at("reached").get<bool>();
  m.collision = j.at("collision").get<bool>();
  m.goal_error = j.at("goal_error").get<double>();
  if (!j.at("tracking_error_mean").is_null()) m.tracking_error_mean = j.at("tracking_error_mean").get<double>();
  m.efficiency = j.at("efficiency").get<double>();
  m.duration = j.at("duration").get<double>();
  m.has_link = j.at("has_link").get<bool>();
  m.link.master_throughput = j.at("throughput_avg").at("master").get<double>();
  m.link.client_throughput = j.at("throughput_avg").at("client").get<double>();
  m.link.master_throughput_loss = j.at("throughput_loss").at("master").get<double>();
  m.link.client_throughput_loss = j.at("throughput_loss").at("client").get<double>();
  if (!j.at("latency_avg").is_null()) m.link.latency_avg = j.at("latency_avg").get<double>();
  m.link.msgs_dropped = j.at("msgs_dropped").get<std::uint64_t>();
  m.link.window = m.duration;
  m.fb_messages = j.at("fb_messages").get<std::uint64_t>();
  from_json_compute(j.at("compute_proxy").at("client"), m.client_compute);
  from_json_compute(j.at("compute_proxy").at("master"), m.master_compute);
  const auto c = j.at("client_final").get<std::vector<double>>();
  m.client_final = {c.at(0), c.at(1), c.at(2)};
  if (!j.at("master_final").is_null()) {
    const auto p = j.at("master_final").get<std::vector<double>>();
    m.master_final = Pose2D{p.at(0), p.at(1), p.at(2)};
  }
}

struct Trial::Impl {
  CaseConfig cfg;
  std::unique_ptr<Link> link;
  SimLink* sim{nullptr};
  Robot client;
  std::optional<Robot> master;
  std::optional<Navigator> nav;  // Case 0: onboard the Client; 1: remote; 3: on the Master
  std::optional<ScriptedOperator> op;
  NodeCompute client_compute;
  NodeCompute master_compute;
  std::map<std::string, std::int64_t> seq[2];
  std::int64_t tick{0};

  // Case 1 remote node: scans wait for the odometry taken with them.
  std::map<std::int64_t, OdomBody> odoms;
  std::deque<WireMessage> scans;

  double last_fmax{0.0};
  std::uint64_t fb_messages{0};

  std::optional<Twist> operator_cmd;
  double operator_stamp{0.0};
  bool operator_confirmed{false};
  bool operator_present{true};

  std::optional<double> goal_time;
  bool done{false};
  TrialOutcome outcome{TrialOutcome::Timeout};
  TickRecord last;
  std::ostream* transcript{nullptr};
  std::size_t link_events_written{0};
  std::optional<TrialMetrics> final_metrics;

  explicit Impl(CaseConfig c, std::unique_ptr<Link> l) : cfg(std::move(c)) {
    cfg.validate();
    const ScenarioPair rooms = cfg.scenario_dir.empty()
                                   ? load_scenario(cfg.scenario_id, cfg.scenario_overrides)
                                   : load_scenario_from_catalog(cfg.scenario_id, cfg.scenario_dir,
                                                                cfg.scenario_overrides);
    client = make_robot(rooms.client, cfg.mux);
    const WorldSpec& cw = *client.spec;

    if (cfg.case_id != 0) {
      if (l) {
        link = std::move(l);
      } else {
        LinkConfig lc = cfg.link;
        lc.seed ^= cfg.seed;
        auto s = std::make_unique<SimLink>(lc);
        sim = s.get();
        link = std::move(s);
      }
    }

    switch (cfg.case_id) {
      case 0:
      case 1:
        nav.emplace(cw.bounds(), cw.robot_footprint_radius, cw.limits, cfg.nav);
        nav->set_goal(cfg.goal);
        break;
      case 2: {
        // The operator's room mirrors the Client's obstacles for guidance.
        WorldSpec mirrored = cw;
        mirrored.label = cw.label + " (master mirror)";
        mirrored.robot_kind = RobotKind::DifferentialDrive;
        master = make_robot(mirrored, cfg.mux);
        if (cfg.teleop_source == TeleopSource::Scripted) op.emplace(mirrored, cfg.goal, cfg.op);
        break;
      }
      case 3: {
        master = make_robot(rooms.master, cfg.mux);
        const WorldSpec& mw = *master->spec;
        nav.emplace(mw.bounds(), mw.robot_footprint_radius, mw.limits, cfg.nav);
        nav->set_goal(cfg.goal);
        break;
      }
    }
    record_traces();
  }

  double now() const { return client.state.time; }

  void send(Side from, WireBody body, double stamp) {
    const std::string topic = default_topic(body);
    const std::int64_t n = ++seq[static_cast<int>(from)][topic];
    WireMessage msg = make_message(std::move(body), stamp, n);
    auto& c = from == Side::Client ? client_compute : master_compute;
    c.bytes_out += wire_size(msg);
    ++c.msgs_out;
    link->send(from, std::move(msg));
  }

  std::vector<WireMessage> receive(Side at, double t) {
    if (!link) return {};
    auto msgs = link->poll(at, t);
    auto& c = at == Side::Client ? client_compute : master_compute;
    for (const auto& m : msgs) {
      c.bytes_in += wire_size(m);
      ++c.msgs_in;
    }
    return msgs;
  }

  static void publish(Robot& r, const std::string& ch, const Twist& tw, double stamp, std::int64_t tag) {
    if (r.mux.has_channel(ch)) r.mux.publish(ch, tw, stamp, tag);
  }

  // Periodic work of each node on a sensor/control tick.
  void master_tick(double t) {
    const double control_dt = 2.0 * cfg.dt;
    if (cfg.case_id == 2) {
      if (op) master->mux.publish("nav", op->command(master->state.pose, t), t);
      const Pose2D& p = master->state.pose;
      send(Side::Master, OdomBody{p, master->state.twist.v, master->state.twist.w}, t);
    } else if (cfg.case_id == 3) {
      nav->on_scan(master->state.pose, *master->scan);
      Twist cmd = nav->control(master->state.pose, master->state.twist, t, control_dt);
      if (cfg.teleop_source == TeleopSource::Console) {
        if (!operator_present) cmd = {};
        else if (operator_cmd && t - operator_stamp <= kDefaultChannelTimeout + 1e-9) cmd = *operator_cmd;
      }
      master->mux.publish("nav", cmd, t);
      send(Side::Master, TwistBody{"nav", cmd}, t);
    }
  }

  void client_tick(double t) {
    const double control_dt = 2.0 * cfg.dt;
    const LaserScan& s = *client.scan;
    if (cfg.case_id == 0) {
      nav->on_scan(client.state.pose, s);
      client.mux.publish("nav", nav->control(client.state.pose, client.state.twist, t, control_dt), t);
    } else if (cfg.case_id == 1) {
      const Pose2D& p = client.state.pose;
      send(Side::Client, OdomBody{p, client.state.twist.v, client.state.twist.w}, t);
      send(Side::Client, ScanBody{s.angle_min, s.angle_increment, s.range_max, s.ranges}, t);
    } else if (cfg.case_id == 3) {
      const ForceVector force = compute_force(s, cfg.force);
      client_compute.force_rays += s.size();
      ++client_compute.scans;
      last_fmax = force.max_f;
      if (const auto fb = reactive_twist(force, cfg.force, min_forward_range(s))) {
        const std::int64_t n = seq[static_cast<int>(Side::Client)]["fb"] + 1;
        client.mux.publish("fb", scale_twist(*fb, cfg.gains), t, n);
        send(Side::Client, FbBody{fb->v, fb->w, force.max_f}, t);
        ++fb_messages;
      }
    }
  }

  void client_handle(std::vector<WireMessage> inbox) {
    for (const auto& m : inbox) {
      if (const auto* b = std::get_if<TwistBody>(&m.body)) {
        // Case 1 twists come from the remote brain unscaled; Case 3 twists are the Master's.
        const Twist tw = cfg.case_id == 3 ? scale_twist(b->twist, cfg.gains) : b->twist;
        publish(client, b->channel, tw, m.stamp, m.seq);
      } else if (const auto* o = std::get_if<OdomBody>(&m.body)) {
        if (cfg.case_id == 2) client.mux.publish("nav", scale_twist({o->v, 0.0, o->w}, cfg.gains), m.stamp, m.seq);
      }
    }
  }

  void master_handle(std::vector<WireMessage> inbox, double t) {
    for (auto& m : inbox) {
      if (const auto* b = std::get_if<FbBody>(&m.body)) {
        if (cfg.case_id == 3 && cfg.master_applies_feedback) {
          master->mux.publish("fb", {b->vr, 0.0, b->wr}, m.stamp, m.seq);
        }
      } else if (const auto* o = std::get_if<OdomBody>(&m.body)) {
        if (cfg.case_id == 1) odoms[m.seq] = *o;
      } else if (std::holds_alternative<ScanBody>(m.body)) {
        if (cfg.case_id == 1) scans.push_back(std::move(m));
      }
    }
    if (cfg.case_id == 1) remote_brain(t);
  }

  // Case 1: the remote navigator consumes each scan with the odometry taken with it.
  void remote_brain(double t) {
    while (!scans.empty()) {
      const auto it = odoms.find(scans.front().seq);
      if (it == odoms.end()) break;
      const auto& sb = std::get<ScanBody>(scans.front().body);
      const LaserScan scan{scans.front().stamp, sb.angle_min, sb.angle_increment, sb.range_max, sb.ranges};
      const OdomBody odom = it->second;
      nav->on_scan(odom.pose, scan);
      const Twist cmd = nav->control(odom.pose, {odom.v, 0.0, odom.w}, t, 2.0 * cfg.dt);
      send(Side::Master, TwistBody{"nav", cmd}, t);
      odoms.erase(odoms.begin(), std::next(it));
      scans.pop_front();
    }
  }

  bool goal_event() const {
    switch (cfg.case_id) {
      case 0:
      case 1:
      case 3:
        return nav->state().mode == NavMode::GoalReached;
      case 2:
        return op ? op->confirmed() : operator_confirmed;
    }
    return false;
  }

  void record_traces() {
    client.trace.push_back(start_aligned(client.state.pose, client.spec->start_pose).position());
    if (master) master->trace.push_back(start_aligned(master->state.pose, master->spec->start_pose).position());
  }

  void finish(TrialOutcome o) {
    done = true;
    outcome = o;
  }

  bool step() {
    if (done) return false;
    const double t = now();
    if (t >= cfg.trial_timeout - 1e-9) {
      finish(goal_time ? TrialOutcome::Reached : TrialOutcome::Timeout);
      write_end();
      return false;
    }
    const bool sensor = tick % 2 == 0;
    if (sensor) {
      client.scan = raycast_scan(client.state, client.state.pose);
      if (master) master->scan = raycast_scan(master->state, master->state.pose);
    }
    if (link && tick % static_cast<std::int64_t>(std::lround(1.0 / cfg.dt)) == 0) link->ping(Side::Master, t);
    if (sensor) {
      if (master) master_tick(t);
      client_tick(t);
    }
    // Messages are handled as they land. Anything arriving before the end of
    // this physics step acts in this step, so with a link faster than dt the
    // Client executes the Master's twist, and both MUXes see a reactive twist,
    // in the tick it was issued.
    const double horizon = t + cfg.dt - 1e-9;
    while (link) {
      auto client_in = receive(Side::Client, horizon);
      auto master_in = receive(Side::Master, horizon);
      if (client_in.empty() && master_in.empty()) break;
      client_handle(std::move(client_in));
      master_handle(std::move(master_in), t);
    }

    last = {};
    last.tick = tick;
    last.time = t;
    last.client_sel = client.mux.select(t);
    client.state = step_world(client.state, last.client_sel ? last.client_sel->twist : Twist{}, cfg.dt);
    last.client_pose = client.state.pose;
    if (master) {
      last.master_sel = master->mux.select(t);
      master->state = step_world(master->state, last.master_sel ? last.master_sel->twist : Twist{}, cfg.dt);
      last.master_pose = master->state.pose;
    }
    ++tick;
    record_traces();
    write_tick();

    const double t_end = now();
    if (!goal_time && goal_event()) goal_time = t_end;
    if (client.state.collided || (master && master->state.collided)) {
      finish(TrialOutcome::Collision);
    } else if (goal_time && t_end >= *goal_time + cfg.settle_time - 1e-9) {
      finish(TrialOutcome::Reached);
    } else if (t_end >= cfg.trial_timeout - 1e-9) {
      finish(goal_time ? TrialOutcome::Reached : TrialOutcome::Timeout);
    }
    if (done) write_end();
    return !done;
  }

  void write_link_events() {
    if (!transcript || !sim) return;
    const auto& events = sim->transcript();
    for (; link_events_written < events.size(); ++link_events_written) {
      *transcript << nlohmann::json(events[link_events_written]).dump() << '\n';
    }
  }

  void write_tick() {
    if (!transcript) return;
    write_link_events();
    nlohmann::json j = {{"ev", "tick"},
                        {"k", last.tick},
                        {"t", last.time},
                        {"client", pose_array(last.client_pose)},
                        {"sel_client", selection_json(last.client_sel)}};
    if (last.master_pose) {
      j["master"] = pose_array(*last.master_pose);
      j["sel_master"] = selection_json(last.master_sel);
    }
    *transcript << j.dump() << '\n';
  }

  void write_end() {
    if (!transcript) return;
    write_link_events();
    *transcript << nlohmann::json{{"ev", "end"}, {"t", now()}, {"outcome", to_string(outcome)}}.dump() << '\n';
  }

  TrialMetrics compute_metrics() {
    if (final_metrics) return *final_metrics;
    TrialMetrics m;
    m.case_id = cfg.case_id;
    m.scenario_id = cfg.scenario_id;
    m.seed = cfg.seed;
    m.goal = cfg.goal;
    m.outcome = outcome;
    m.collision = outcome == TrialOutcome::Collision;
    m.reached = outcome == TrialOutcome::Reached;
    m.duration = now();
    m.efficiency = goal_time ? std::min(*goal_time, cfg.trial_timeout) : now();
    const Pose2D client_final = start_aligned(client.state.pose, client.spec->start_pose);
    m.client_final = client.state.pose;
    m.goal_error = goal_error(client_final, cfg.goal);
    if (master) {
      m.master_final = master->state.pose;
      m.tracking_error_mean = tracking_error(master->trace, client.trace);
    }
    if (link) {
      if (sim) sim->drain();
      m.has_link = true;
      m.link = summarize(link->stats(), m.duration);
    }
    m.fb_messages = fb_messages;
    m.client_compute = client_compute;
    m.master_compute = master_compute;
    if (nav) add_nav_counters(cfg.case_id == 0 ? m.client_compute : m.master_compute, nav->counters());
    final_metrics = m;
    return m;
  }
};

Trial::Trial(CaseConfig cfg, std::unique_ptr<Link> link)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(link))) {}

Trial::~Trial() = default;

bool Trial::step() { return impl_->step(); }
bool Trial::finished() const { return impl_->done; }
double Trial::time() const { return impl_->now(); }

void Trial::operator_twist(const Twist& twist) {
  auto& d = *impl_;
  if (d.cfg.teleop_source != TeleopSource::Console) return;
  d.operator_cmd = twist;
  d.operator_stamp = d.now();
  if (d.cfg.case_id == 2) d.master->mux.publish("nav", twist, d.now());
}

void Trial::operator_confirm_goal() {
  if (impl_->cfg.teleop_source == TeleopSource::Console) impl_->operator_confirmed = true;
}

void Trial::set_operator_present(bool present) { impl_->operator_present = present; }

TrialMetrics Trial::metrics() { return impl_->compute_metrics(); }

TrialView Trial::view() const {
  const auto& d = *impl_;
  TrialView v;
  v.time = d.now();
  const Robot& lead = d.master ? *d.master : d.client;
  v.master_pose = lead.state.pose;
  if (lead.scan) {
    v.master_scan = lead.scan->ranges;
    v.scan_angle_min = lead.scan->angle_min;
    v.scan_angle_increment = lead.scan->angle_increment;
    v.scan_range_max = lead.scan->range_max;
  }
  v.fmax = d.last_fmax;
  v.f_th = d.cfg.force.f_th;
  if (d.link && v.time > 0.0) {
    const LinkStats stats = d.link->stats();
    const LinkSummary sum = summarize(stats, v.time);
    if (!stats.latency_samples.empty()) v.latency = sum.latency_avg;
    v.throughput_client = sum.client_throughput;
  }
  if (d.master && !d.master->trace.empty()) v.tracking_error = distance(d.master->trace.back(), d.client.trace.back());
  v.goal_distance = distance(lead.state.pose.position(), d.cfg.goal);
  if (d.nav) v.mode = std::string(to_string(d.nav->state().mode));
  else v.mode = d.operator_confirmed ? "confirmed" : "operator";
  return v;
}

const TickRecord& Trial::last_tick() const { return impl_->last; }
const WorldSpec& Trial::master_room() const { return *(impl_->master ? *impl_->master : impl_->client).spec; }
const CaseConfig& Trial::config() const { return impl_->cfg; }

void Trial::set_transcript(std::ostream* out) {
  impl_->transcript = out;
  if (out) *out << nlohmann::json{{"ev", "config"}, {"config", impl_->cfg}}.dump() << '\n';
}

TrialMetrics run_trial(const CaseConfig& cfg, std::ostream* transcript) {
  Trial trial(cfg);
  trial.set_transcript(transcript);
  while (trial.step()) {
  }
  return trial.metrics();
}

}  // namespace atsim
