#include "atsim/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

namespace atsim {

namespace fs = std::filesystem;

const std::vector<Vec2>& default_goals() {
  static const std::vector<Vec2> goals{{6.0, 0.0}, {6.8, 2.0}, {7.8, -1.8}, {8.8, 1.8}, {10.0, 0.0}};
  return goals;
}

void SweepSpec::validate() const {
  if (cases.empty() || scenarios.empty() || goals.empty()) {
    throw std::invalid_argument("sweep needs at least one case, scenario and goal");
  }
  if (trials_per_cell < 1) throw std::invalid_argument("trials_per_cell must be >= 1");
  for (int c : cases) {
    if (c < 0 || c > 3) throw std::invalid_argument("sweep case ids must be 0..3");
  }
  for (int s : scenarios) {
    if (s < 1 || s > kScenarioCount) throw std::invalid_argument("sweep scenario ids must be 1..5");
  }
  if (std::set<int>(cases.begin(), cases.end()).size() != cases.size() ||
      std::set<int>(scenarios.begin(), scenarios.end()).size() != scenarios.size()) {
    throw std::invalid_argument("sweep cases and scenarios must not repeat");
  }
  const auto s = effective_seeds();
  if (std::set<std::uint64_t>(s.begin(), s.end()).size() != s.size()) {
    throw std::invalid_argument("sweep seeds must not repeat");
  }
  CaseConfig probe = base;
  probe.case_id = cases.front();
  probe.scenario_id = scenarios.front();
  if (probe.teleop_source == TeleopSource::Console) throw std::invalid_argument("sweeps need the scripted teleop source");
  probe.validate();
}

std::vector<std::uint64_t> SweepSpec::effective_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> s;
  for (int i = 0; i < trials_per_cell; ++i) s.push_back(static_cast<std::uint64_t>(i));
  return s;
}

void to_json(nlohmann::json& j, const SweepSpec& s) {
  nlohmann::json goals = nlohmann::json::array();
  for (const auto& g : s.goals) goals.push_back({g.x, g.y});
  j = {{"cases", s.cases},
       {"scenarios", s.scenarios},
       {"goals", goals},
       {"seeds", s.effective_seeds()},
       {"trials_per_cell", s.trials_per_cell},
       {"pairing", s.pairing == GoalPairing::Cross ? "cross" : "zip"},
       {"base", s.base}};
}

void from_json(const nlohmann::json& j, SweepSpec& s) {
  for (const auto& item : j.items()) {
    static const std::set<std::string> allowed{"cases", "scenarios", "goals", "seeds", "trials_per_cell", "pairing",
                                               "base"};
    if (!allowed.count(item.key())) throw std::invalid_argument("unknown key '" + item.key() + "' in sweep spec");
  }
  SweepSpec d;
  d.cases = j.value("cases", d.cases);
  d.scenarios = j.value("scenarios", d.scenarios);
  if (j.contains("goals")) {
    d.goals.clear();
    for (const auto& g : j.at("goals")) {
      const auto v = g.get<std::vector<double>>();
      if (v.size() != 2) throw std::invalid_argument("sweep goals must be [x, y] pairs");
      d.goals.push_back({v[0], v[1]});
    }
  }
  d.seeds = j.value("seeds", d.seeds);
  d.trials_per_cell = j.value("trials_per_cell", d.trials_per_cell);
  const std::string pairing = j.value("pairing", std::string("zip"));
  if (pairing == "zip") d.pairing = GoalPairing::Zip;
  else if (pairing == "cross") d.pairing = GoalPairing::Cross;
  else throw std::invalid_argument("sweep pairing must be 'zip' or 'cross'");
  if (j.contains("base")) d.base = j.at("base").get<CaseConfig>();
  s = std::move(d);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string sweep_id(const SweepSpec& spec) { return fnv1a_hex(nlohmann::json(spec).dump()); }

std::vector<SweepTrial> expand(const SweepSpec& spec) {
  spec.validate();
  const auto seeds = spec.effective_seeds();
  std::vector<std::pair<std::size_t, std::uint64_t>> plan;  // (goal index, seed)
  if (spec.pairing == GoalPairing::Cross) {
    for (std::size_t g = 0; g < spec.goals.size(); ++g) {
      for (auto s : seeds) plan.emplace_back(g, s);
    }
  } else {
    for (int i = 0; i < spec.trials_per_cell; ++i) {
      plan.emplace_back(static_cast<std::size_t>(i) % spec.goals.size(), seeds[static_cast<std::size_t>(i) % seeds.size()]);
    }
  }
  std::set<std::uint64_t> distinct;
  for (const auto& p : plan) distinct.insert(p.second);
  const bool tag_goal = distinct.size() != plan.size();

  std::vector<SweepTrial> out;
  for (int c : spec.cases) {
    for (int s : spec.scenarios) {
      for (const auto& [g, seed] : plan) {
        SweepTrial t;
        t.config = spec.base;
        t.config.case_id = c;
        t.config.scenario_id = s;
        t.config.goal = spec.goals[g];
        t.config.seed = seed;
        t.goal_index = g;
        t.file_name = std::to_string(c) + "-" + std::to_string(s) + "-" +
                      (tag_goal ? "g" + std::to_string(g) + "-" : std::string()) + std::to_string(seed) + ".json";
        out.push_back(std::move(t));
      }
    }
  }
  return out;
}

std::vector<TrialMetrics> run_trials(const std::vector<SweepTrial>& trials, unsigned jobs,
                                     const SweepProgress& progress) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, trials.size())));
  std::vector<TrialMetrics> results(trials.size());
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;
  std::exception_ptr failure;

  auto worker = [&] {
    for (std::size_t i = next++; i < trials.size(); i = next++) {
      try {
        results[i] = run_trial(trials[i].config);
      } catch (...) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
      std::lock_guard<std::mutex> lock(progress_mutex);
      ++done;
      if (progress) progress(done, trials.size(), results[i]);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

SweepResult run_sweep(const SweepSpec& spec, const fs::path& out_root, unsigned jobs, const SweepProgress& progress) {
  SweepResult r;
  r.id = sweep_id(spec);
  r.trials = expand(spec);
  r.metrics = run_trials(r.trials, jobs, progress);
  r.rows = aggregate(r.metrics);
  if (out_root.empty()) return r;

  r.dir = out_root / r.id;
  fs::create_directories(r.dir);
  std::ofstream(r.dir / "sweep.json") << nlohmann::json(spec).dump(2) << '\n';
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    const nlohmann::json record = {{"config", r.trials[i].config}, {"metrics", r.metrics[i]}};
    std::ofstream(r.dir / r.trials[i].file_name) << record.dump(2) << '\n';
  }
  {
    std::ofstream csv(r.dir / "aggregate.csv");
    write_csv(csv, r.rows);
  }
  std::ofstream(r.dir / "report.md") << render_tables(r.rows) << "## Acceptance flags\n\n```\n"
                                     << render_flags(evaluate_flags(r.rows)) << "```\n";
  return r;
}

std::vector<TrialMetrics> load_trial_records(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".json" && e.path().filename() != "sweep.json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(in)) {
      files.push_back(in);
    } else {
      throw std::invalid_argument("no such input: " + in.string());
    }
  }
  std::vector<TrialMetrics> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    const nlohmann::json j = nlohmann::json::parse(in);
    out.push_back((j.contains("metrics") ? j.at("metrics") : j).get<TrialMetrics>());
  }
  if (out.empty()) throw std::invalid_argument("no trial records found");
  return out;
}

}  // namespace atsim
