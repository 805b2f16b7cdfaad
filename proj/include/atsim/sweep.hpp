#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "atsim/report.hpp"
#include "atsim/trial.hpp"

namespace atsim {

/// Goals 6-10 m from the origin used when a sweep names none.
const std::vector<Vec2>& default_goals();

enum class GoalPairing {
  /// Every goal runs with every seed.
  Cross,
  /// Trial i of a cell uses goal i and seed i (both cycled), trials_per_cell trials.
  Zip,
};

struct SweepSpec {
  std::vector<int> cases{0, 1, 2, 3};
  std::vector<int> scenarios{1, 2, 3, 4, 5};
  std::vector<Vec2> goals = default_goals();
  /// Empty means seeds 0 .. trials_per_cell-1.
  std::vector<std::uint64_t> seeds;
  int trials_per_cell{5};
  GoalPairing pairing{GoalPairing::Zip};
  /// Template for every trial; case, scenario, goal and seed are overwritten.
  CaseConfig base;

  /// Throws std::invalid_argument on an empty cross product or bad ids.
  void validate() const;
  std::vector<std::uint64_t> effective_seeds() const;
};

void to_json(nlohmann::json& j, const SweepSpec& s);
void from_json(const nlohmann::json& j, SweepSpec& s);

/// 64-bit FNV-1a over bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Hash of the canonical spec JSON; names the output directory.
std::string sweep_id(const SweepSpec& spec);

struct SweepTrial {
  CaseConfig config;
  std::size_t goal_index{0};
  /// `<case>-<scenario>-<seed>.json`, with `-g<goal index>` before the seed
  /// when a cell repeats a seed.
  std::string file_name;
};

/// The full trial list in deterministic order (case, scenario, trial index).
std::vector<SweepTrial> expand(const SweepSpec& spec);

struct SweepResult {
  std::string id;
  std::filesystem::path dir;
  std::vector<SweepTrial> trials;
  std::vector<TrialMetrics> metrics;
  std::vector<ReportRow> rows;
};

using SweepProgress = std::function<void(std::size_t done, std::size_t total, const TrialMetrics&)>;

/// Runs every trial on `jobs` worker threads (0 = hardware concurrency).
/// Results are independent of `jobs`.
std::vector<TrialMetrics> run_trials(const std::vector<SweepTrial>& trials, unsigned jobs = 0,
                                     const SweepProgress& progress = nullptr);

/// Runs the sweep and, when `out_root` is non-empty, writes
/// `<out_root>/<sweep-id>/` with sweep.json, one JSON per trial, aggregate.csv
/// and report.md.
SweepResult run_sweep(const SweepSpec& spec, const std::filesystem::path& out_root, unsigned jobs = 0,
                      const SweepProgress& progress = nullptr);

/// Loads trial records (`{"config":..,"metrics":..}` files or bare metrics)
/// from files and directories. Directories are scanned for *.json, skipping
/// sweep.json. Throws std::invalid_argument when nothing is found.
std::vector<TrialMetrics> load_trial_records(const std::vector<std::filesystem::path>& inputs);

}  // namespace atsim
