// atsim: single trials, sweeps, reports and the live console bridge.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "atsim/bridge.hpp"
#include "atsim/sweep.hpp"
#include "atsim/tcp_link.hpp"

using namespace atsim;
namespace fs = std::filesystem;

namespace {

constexpr int kConfigError = 1;

/// Exit code for anything wrong with flags, files or configs.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Vec2 parse_goal(const std::string& text) {
  std::istringstream in(text);
  Vec2 g;
  char comma = 0;
  if (!(in >> g.x >> comma >> g.y) || comma != ',' || !(in >> std::ws).eof()) {
    throw ConfigError("goal must be 'x,y', got '" + text + "'");
  }
  return g;
}

fs::path default_out() {
  if (const char* env = std::getenv("AT_SIM_OUT"); env && *env) return env;
  return "out";
}

/// Flags shared by run and serve that patch a CaseConfig.
struct TrialFlags {
  std::string config;
  std::optional<int> case_id;
  std::optional<int> scenario;
  std::optional<std::string> goal;
  std::optional<std::uint64_t> seed;
  std::optional<double> timeout;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "CaseConfig JSON file");
    app.add_option("--case", case_id, "Experiment case 0..3");
    app.add_option("--scenario", scenario, "Scenario 1..5");
    app.add_option("--goal", goal, "Goal 'x,y' in the Master frame");
    app.add_option("--seed", seed, "Trial seed");
    app.add_option("--timeout", timeout, "Trial timeout, seconds");
  }

  CaseConfig build() const {
    CaseConfig cfg;
    if (!config.empty()) cfg = read_json_file(config).get<CaseConfig>();
    if (case_id) cfg.case_id = *case_id;
    if (scenario) cfg.scenario_id = *scenario;
    if (goal) cfg.goal = parse_goal(*goal);
    if (seed) cfg.seed = *seed;
    if (timeout) cfg.trial_timeout = *timeout;
    return cfg;
  }
};

std::string trial_stem(const CaseConfig& cfg) {
  return std::to_string(cfg.case_id) + "-" + std::to_string(cfg.scenario_id) + "-" + std::to_string(cfg.seed);
}

void write_record(const fs::path& path, const CaseConfig& cfg, const TrialMetrics& m) {
  std::ofstream(path) << nlohmann::json{{"config", cfg}, {"metrics", m}}.dump(2) << '\n';
}

void print_outcome(const TrialMetrics& m, const fs::path& record) {
  std::cout << "case " << m.case_id << " scenario " << m.scenario_id << " seed " << m.seed << ": "
            << to_string(m.outcome) << ", goal_error " << m.goal_error << " m, efficiency " << m.efficiency << " s";
  if (m.tracking_error_mean) std::cout << ", tracking_error " << *m.tracking_error_mean << " m";
  std::cout << "\n" << record.string() << "\n";
}

int cmd_run(const TrialFlags& flags, const fs::path& out) {
  const CaseConfig cfg = flags.build();
  cfg.validate();
  if (cfg.teleop_source == TeleopSource::Console) throw ConfigError("run needs the scripted source; use serve");
  fs::create_directories(out);
  const fs::path record = out / (trial_stem(cfg) + ".json");
  std::ofstream transcript(out / (trial_stem(cfg) + ".transcript.jsonl"));

  std::unique_ptr<Link> link;
  if (cfg.case_id != 0 && cfg.link.backend == LinkBackend::Socket) link = std::make_unique<TcpLink>(cfg.link);
  Trial trial(cfg, std::move(link));
  trial.set_transcript(&transcript);
  while (trial.step()) {
  }
  const TrialMetrics m = trial.metrics();
  write_record(record, cfg, m);
  print_outcome(m, record);
  return exit_code(m.outcome);
}

struct SweepFlags {
  std::string config;
  std::vector<int> cases;
  std::vector<int> scenarios;
  std::vector<std::string> goals;
  std::vector<std::uint64_t> seeds;
  std::optional<int> trials;
  std::optional<double> timeout;
  std::string pairing;
  unsigned jobs{0};
};

int cmd_sweep(const SweepFlags& f, const fs::path& out) {
  SweepSpec spec;
  if (!f.config.empty()) spec = read_json_file(f.config).get<SweepSpec>();
  if (!f.cases.empty()) spec.cases = f.cases;
  if (!f.scenarios.empty()) spec.scenarios = f.scenarios;
  if (!f.goals.empty()) {
    spec.goals.clear();
    for (const auto& g : f.goals) spec.goals.push_back(parse_goal(g));
  }
  if (!f.seeds.empty()) spec.seeds = f.seeds;
  if (f.trials) spec.trials_per_cell = *f.trials;
  if (f.timeout) spec.base.trial_timeout = *f.timeout;
  if (f.pairing == "cross") spec.pairing = GoalPairing::Cross;
  if (f.pairing == "zip") spec.pairing = GoalPairing::Zip;
  spec.validate();

  const SweepResult r = run_sweep(spec, out, f.jobs, [](std::size_t done, std::size_t total, const TrialMetrics& m) {
    std::cerr << "[" << done << "/" << total << "] case " << m.case_id << " scenario " << m.scenario_id << " seed "
              << m.seed << ": " << to_string(m.outcome) << "\n";
  });
  std::cout << render_flags(evaluate_flags(r.rows)) << r.dir.string() << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  if (inputs.empty()) throw ConfigError("report needs at least one input");
  std::vector<ReportRow> rows;
  if (inputs.size() == 1 && fs::path(inputs.front()).extension() == ".csv") {
    std::ifstream in(inputs.front());
    if (!in) throw ConfigError("cannot open " + inputs.front());
    rows = read_csv(in);
  } else {
    rows = aggregate(load_trial_records({inputs.begin(), inputs.end()}));
  }
  const std::string tables = render_tables(rows);
  const std::string flags = render_flags(evaluate_flags(rows));
  std::cout << tables << "## Acceptance flags\n\n" << flags;
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "aggregate.csv");
    write_csv(csv, rows);
    std::ofstream(fs::path(out) / "report.md") << tables << "## Acceptance flags\n\n```\n" << flags << "```\n";
  }
  return 0;
}

std::atomic<LiveServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (LiveServer* s = g_server.load()) s->stop();
}

int cmd_serve(const TrialFlags& flags, std::uint16_t port, double speed, const fs::path& out) {
  CaseConfig cfg = flags.build();
  // Serving always means a console operator.
  cfg.teleop_source = TeleopSource::Console;
  ServeOptions opts;
  opts.port = port;
  opts.speed = speed;
  LiveServer server(cfg, opts);
  std::cerr << "serving case " << cfg.case_id << " scenario " << cfg.scenario_id << " on ws://" << opts.host << ":"
            << server.port() << "/ (waiting for the operator)\n";
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  fs::create_directories(out);
  std::ofstream transcript(out / ("live-" + trial_stem(cfg) + ".transcript.jsonl"));
  const TrialMetrics m = server.run(&transcript);
  g_server = nullptr;
  const fs::path record = out / ("live-" + trial_stem(cfg) + ".json");
  write_record(record, cfg, m);
  print_outcome(m, record);
  return exit_code(m.outcome);
}

int cmd_scenarios(const fs::path& dir) {
  fs::create_directories(dir);
  for (int id = 1; id <= kScenarioCount; ++id) {
    const fs::path p = dir / (std::to_string(id) + ".json");
    std::ofstream(p) << scenario_document(id).dump(2) << '\n';
    std::cout << p.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-world teleoperation simulator and experiment harness"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_flag;
  app.add_option("--out", out_flag, "Output directory (default $AT_SIM_OUT or ./out)");

  TrialFlags run_flags;
  auto* run = app.add_subcommand("run", "Run one trial; exit 0 reached, 2 timeout, 3 collision");
  run_flags.attach(*run);

  SweepFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Run a case x scenario sweep and write the artifact tree");
  sweep->add_option("--config", sweep_flags.config, "SweepSpec JSON file");
  sweep->add_option("--case", sweep_flags.cases, "Cases, comma separated")->delimiter(',');
  sweep->add_option("--scenario", sweep_flags.scenarios, "Scenarios, comma separated")->delimiter(',');
  sweep->add_option("--goal", sweep_flags.goals, "Goal 'x,y'; repeat for several");
  sweep->add_option("--seed", sweep_flags.seeds, "Seeds, comma separated")->delimiter(',');
  sweep->add_option("--trials", sweep_flags.trials, "Trials per (case, scenario) cell");
  sweep->add_option("--timeout", sweep_flags.timeout, "Trial timeout, seconds");
  sweep->add_option("--pairing", sweep_flags.pairing, "Goal/seed pairing")->check(CLI::IsMember({"zip", "cross"}));
  sweep->add_option("--jobs", sweep_flags.jobs, "Worker threads (0 = all cores)");

  std::vector<std::string> report_inputs;
  auto* report = app.add_subcommand("report", "Tables and acceptance flags from trial records or aggregate.csv");
  report->add_option("inputs", report_inputs, "Trial JSON files, sweep directories or one aggregate.csv");

  TrialFlags serve_flags;
  std::uint16_t port = 8765;
  double speed = 1.0;
  auto* serve = app.add_subcommand("serve", "Host a console-driven Case 2 or 3 trial over WebSocket");
  serve_flags.attach(*serve);
  serve->add_option("--port", port, "WebSocket port (0 = ephemeral)");
  serve->add_option("--speed", speed, "Virtual seconds per wall second");

  auto* scenarios = app.add_subcommand("scenarios", "Write the built-in scenario catalog as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }

  const fs::path out = out_flag.empty() ? default_out() : fs::path(out_flag);
  try {
    if (*run) return cmd_run(run_flags, out);
    if (*sweep) return cmd_sweep(sweep_flags, out);
    if (*report) return cmd_report(report_inputs, out_flag);
    if (*serve) return cmd_serve(serve_flags, port, speed, out);
    if (*scenarios) return cmd_scenarios(out_flag.empty() ? fs::path("scenarios") : fs::path(out_flag));
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const boost::system::system_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
