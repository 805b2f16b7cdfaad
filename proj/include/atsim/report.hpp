#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "atsim/trial.hpp"

namespace atsim {

/// One aggregated metric of one (case, scenario) cell.
struct ReportRow {
  int case_id{0};
  int scenario_id{0};
  std::string metric;
  double mean{0.0};
  double stddev{0.0};
  double min{0.0};
  double max{0.0};
  std::size_t n{0};

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Metric names in report order.
const std::vector<std::string>& report_metrics();

/// Scalar value of `metric` for one trial, or nullopt when the trial has none
/// (tracking error outside Cases 2 and 3).
std::optional<double> metric_value(const TrialMetrics& m, const std::string& metric);

/// Groups trials by (case, scenario) and reduces every metric. Rows are sorted
/// by case, scenario, then metric order.
std::vector<ReportRow> aggregate(const std::vector<TrialMetrics>& trials);

void write_csv(std::ostream& out, const std::vector<ReportRow>& rows);
/// Throws std::invalid_argument on a malformed file.
std::vector<ReportRow> read_csv(std::istream& in);

/// One markdown table per metric: cases as rows, scenarios as columns,
/// cells "mean ± stddev (n)".
std::string render_tables(const std::vector<ReportRow>& rows);

enum class FlagStatus { Pass, Fail, NotApplicable };

std::string_view to_string(FlagStatus status);

struct CriterionFlag {
  int id{0};
  std::string name;
  FlagStatus status{FlagStatus::NotApplicable};
  std::string detail;
};

/// Acceptance checks that are functions of the aggregate alone (criteria 1-6).
/// A check whose rows are missing is NotApplicable.
std::vector<CriterionFlag> evaluate_flags(const std::vector<ReportRow>& rows);

std::string render_flags(const std::vector<CriterionFlag>& flags);

/// Exact shortest round-trip decimal form, used for every number in the CSV.
std::string format_double(double value);

}  // namespace atsim
