#include "atsim/report.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "atsim/metrics.hpp"

namespace atsim {

namespace {

const ReportRow* find_row(const std::vector<ReportRow>& rows, int case_id, int scenario_id,
                          const std::string& metric) {
  for (const auto& r : rows) {
    if (r.case_id == case_id && r.scenario_id == scenario_id && r.metric == metric) return &r;
  }
  return nullptr;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad number '" + s + "' in CSV");
  return v;
}

long long parse_int(const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad integer '" + s + "' in CSV");
  return v;
}

CriterionFlag flag(int id, std::string name) {
  CriterionFlag f;
  f.id = id;
  f.name = std::move(name);
  return f;
}

void set_result(CriterionFlag& f, bool pass, std::string detail) {
  f.status = pass ? FlagStatus::Pass : FlagStatus::Fail;
  f.detail = std::move(detail);
}

}  // namespace

const std::vector<std::string>& report_metrics() {
  static const std::vector<std::string> names{
      "reached",          "collision",         "goal_error",        "tracking_error",
      "efficiency",       "throughput_client", "throughput_master", "throughput_loss_client",
      "throughput_loss_master", "latency",     "compute_client",    "compute_client_counts",
      "compute_master",   "bytes_client",      "fb_messages"};
  return names;
}

std::optional<double> metric_value(const TrialMetrics& m, const std::string& metric) {
  const auto& c = m.client_compute;
  if (metric == "reached") return m.reached ? 1.0 : 0.0;
  if (metric == "collision") return m.collision ? 1.0 : 0.0;
  if (metric == "goal_error") return m.goal_error;
  if (metric == "tracking_error") return m.tracking_error_mean;
  if (metric == "efficiency") return m.efficiency;
  if (metric == "throughput_client") return m.link.client_throughput;
  if (metric == "throughput_master") return m.link.master_throughput;
  if (metric == "throughput_loss_client") return m.link.client_throughput_loss;
  if (metric == "throughput_loss_master") return m.link.master_throughput_loss;
  if (metric == "latency") return m.has_link ? std::optional<double>(m.link.latency_avg) : std::nullopt;
  if (metric == "compute_client") return c.work_units();
  if (metric == "compute_client_counts") {
    return static_cast<double>(c.grid_cell_updates + c.plans + c.msgs_in + c.msgs_out);
  }
  if (metric == "compute_master") return m.master_compute.work_units();
  if (metric == "bytes_client") return static_cast<double>(c.bytes_out);
  if (metric == "fb_messages") return static_cast<double>(m.fb_messages);
  throw std::invalid_argument("unknown metric '" + metric + "'");
}

std::vector<ReportRow> aggregate(const std::vector<TrialMetrics>& trials) {
  std::map<std::pair<int, int>, std::vector<const TrialMetrics*>> cells;
  for (const auto& t : trials) cells[{t.case_id, t.scenario_id}].push_back(&t);
  std::vector<ReportRow> rows;
  for (const auto& [key, members] : cells) {
    for (const auto& metric : report_metrics()) {
      std::vector<double> values;
      for (const auto* m : members) {
        if (const auto v = metric_value(*m, metric)) values.push_back(*v);
      }
      if (values.empty()) continue;
      const SampleStats s = sample_stats(values);
      rows.push_back({key.first, key.second, metric, s.mean, s.stddev, s.min, s.max, s.n});
    }
  }
  return rows;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "case,scenario,metric,mean,stddev,min,max,n\n";
  for (const auto& r : rows) {
    out << r.case_id << ',' << r.scenario_id << ',' << r.metric << ',' << format_double(r.mean) << ','
        << format_double(r.stddev) << ',' << format_double(r.min) << ',' << format_double(r.max) << ',' << r.n
        << '\n';
  }
}

std::vector<ReportRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "case,scenario,metric,mean,stddev,min,max,n") {
    throw std::invalid_argument("aggregate CSV header missing");
  }
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8) throw std::invalid_argument("aggregate CSV row needs 8 fields: " + line);
    ReportRow r;
    r.case_id = static_cast<int>(parse_int(f[0]));
    r.scenario_id = static_cast<int>(parse_int(f[1]));
    r.metric = f[2];
    r.mean = parse_double(f[3]);
    r.stddev = parse_double(f[4]);
    r.min = parse_double(f[5]);
    r.max = parse_double(f[6]);
    r.n = static_cast<std::size_t>(parse_int(f[7]));
    rows.push_back(r);
  }
  return rows;
}

std::string render_tables(const std::vector<ReportRow>& rows) {
  std::set<int> cases, scenarios;
  for (const auto& r : rows) {
    cases.insert(r.case_id);
    scenarios.insert(r.scenario_id);
  }
  std::ostringstream out;
  for (const auto& metric : report_metrics()) {
    if (std::none_of(rows.begin(), rows.end(), [&](const ReportRow& r) { return r.metric == metric; })) continue;
    out << "### " << metric << "\n\n| case |";
    for (int s : scenarios) out << " S" << s << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < scenarios.size(); ++i) out << "---|";
    out << '\n';
    for (int c : cases) {
      out << "| " << c << " |";
      for (int s : scenarios) {
        const ReportRow* r = find_row(rows, c, s, metric);
        if (r) out << ' ' << fmt(r->mean) << " ± " << fmt(r->stddev, 2) << " (" << r->n << ") |";
        else out << " - |";
      }
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

std::string_view to_string(FlagStatus status) {
  switch (status) {
    case FlagStatus::Pass: return "PASS";
    case FlagStatus::Fail: return "FAIL";
    case FlagStatus::NotApplicable: return "N/A";
  }
  return "N/A";
}

std::vector<CriterionFlag> evaluate_flags(const std::vector<ReportRow>& rows) {
  std::vector<CriterionFlag> flags;
  const auto row = [&](int c, int s, const char* metric) { return find_row(rows, c, s, metric); };

  {
    auto f = flag(1, "goal accuracy: Case 3, Scenario 1, every trial reached with goal_error <= 1.0");
    const auto* reached = row(3, 1, "reached");
    const auto* err = row(3, 1, "goal_error");
    if (reached && err) {
      set_result(f, reached->min == 1.0 && err->max <= 1.0,
                 "reached " + fmt(reached->mean * reached->n) + "/" + std::to_string(reached->n) +
                     ", max goal_error " + fmt(err->max));
    }
    flags.push_back(f);
  }
  {
    auto f = flag(2, "throughput: Scenario 2 Client throughput Case 3 <= Case 1 / 5");
    const auto* c1 = row(1, 2, "throughput_client");
    const auto* c3 = row(3, 2, "throughput_client");
    if (c1 && c3) {
      set_result(f, c3->mean < c1->mean / 5.0,
                 "Case 3 " + fmt(c3->mean) + " b/s vs Case 1 / 5 = " + fmt(c1->mean / 5.0) + " b/s");
    }
    flags.push_back(f);
  }
  {
    auto f = flag(3, "tracking: Scenarios 2-3, Case 3 mean < Case 2 mean and stddev across scenarios <=");
    std::vector<double> m2, m3;
    std::size_t n2 = 0, n3 = 0;
    double sum2 = 0.0, sum3 = 0.0;
    for (int s : {2, 3}) {
      if (const auto* r = row(2, s, "tracking_error")) {
        m2.push_back(r->mean);
        sum2 += r->mean * r->n;
        n2 += r->n;
      }
      if (const auto* r = row(3, s, "tracking_error")) {
        m3.push_back(r->mean);
        sum3 += r->mean * r->n;
        n3 += r->n;
      }
    }
    if (m2.size() == 2 && m3.size() == 2) {
      const double mean2 = sum2 / n2, mean3 = sum3 / n3;
      const double sd2 = sample_stats(m2).stddev, sd3 = sample_stats(m3).stddev;
      set_result(f, mean3 < mean2 && sd3 <= sd2,
                 "mean " + fmt(mean3) + " vs " + fmt(mean2) + ", stddev across scenarios " + fmt(sd3) + " vs " +
                     fmt(sd2));
    }
    flags.push_back(f);
  }
  {
    auto f = flag(4, "autonomy baselines: Cases 0 and 1, Scenarios 1-3 reached, goal_error <= 0.3, no collisions");
    bool complete = true, pass = true;
    double worst = 0.0;
    std::size_t misses = 0, collisions = 0;
    for (int c : {0, 1}) {
      for (int s : {1, 2, 3}) {
        const auto* reached = row(c, s, "reached");
        const auto* err = row(c, s, "goal_error");
        const auto* col = row(c, s, "collision");
        if (!reached || !err || !col) {
          complete = false;
          continue;
        }
        misses += static_cast<std::size_t>(std::llround((1.0 - reached->mean) * reached->n));
        collisions += static_cast<std::size_t>(std::llround(col->mean * col->n));
        worst = std::max(worst, err->max);
        pass = pass && reached->min == 1.0 && err->max <= 0.3 && col->max == 0.0;
      }
    }
    if (complete) {
      set_result(f, pass,
                 std::to_string(misses) + " missed, " + std::to_string(collisions) + " collisions, max goal_error " +
                     fmt(worst));
    }
    flags.push_back(f);
  }
  {
    auto f = flag(5, "robustness: Case 3, Scenarios 4 and 5, mean goal_error and tracking_error <= 0.75");
    bool complete = true, pass = true;
    std::string detail;
    for (int s : {4, 5}) {
      const auto* err = row(3, s, "goal_error");
      const auto* trk = row(3, s, "tracking_error");
      if (!err || !trk) {
        complete = false;
        continue;
      }
      pass = pass && err->mean <= 0.75 && trk->mean <= 0.75;
      detail += "S" + std::to_string(s) + " goal " + fmt(err->mean) + " tracking " + fmt(trk->mean) + "; ";
    }
    const auto* e2 = row(3, 2, "efficiency");
    const auto* e5 = row(3, 5, "efficiency");
    if (e2 && e5) detail += "efficiency S5 " + fmt(e5->mean) + " s vs S2 " + fmt(e2->mean) + " s";
    if (complete) set_result(f, pass, detail);
    flags.push_back(f);
  }
  {
    auto f = flag(6, "compute proxy: Scenario 2 Client Case 0 > Case 1 >= Case 3 > Case 2");
    bool complete = true, pass = true;
    std::string detail;
    for (const char* metric : {"compute_client", "compute_client_counts"}) {
      const auto* c0 = row(0, 2, metric);
      const auto* c1 = row(1, 2, metric);
      const auto* c2 = row(2, 2, metric);
      const auto* c3 = row(3, 2, metric);
      if (!c0 || !c1 || !c2 || !c3) {
        complete = false;
        continue;
      }
      pass = pass && c0->mean > c1->mean && c1->mean >= c3->mean && c3->mean > c2->mean;
      detail += std::string(metric) + " " + fmt(c0->mean) + " / " + fmt(c1->mean) + " / " + fmt(c3->mean) +
                " / " + fmt(c2->mean) + "; ";
    }
    if (complete) set_result(f, pass, detail);
    flags.push_back(f);
  }
  return flags;
}

std::string render_flags(const std::vector<CriterionFlag>& flags) {
  std::ostringstream out;
  for (const auto& f : flags) {
    out << "[" << to_string(f.status) << "] " << f.id << ". " << f.name;
    if (!f.detail.empty()) out << " -- " << f.detail;
    out << '\n';
  }
  return out.str();
}

}  // namespace atsim
