#include "atsim/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace atsim {

Pose2D start_aligned(const Pose2D& pose, const Pose2D& start) {
  const double c = std::cos(start.theta), s = std::sin(start.theta);
  const double dx = pose.x - start.x, dy = pose.y - start.y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(pose.theta - start.theta)};
}

double goal_error(const Pose2D& final_pose, Vec2 goal) { return distance(final_pose.position(), goal); }

double tracking_error(const std::vector<Vec2>& master, const std::vector<Vec2>& client) {
  if (master.size() != client.size()) throw std::invalid_argument("tracking traces differ in length");
  if (master.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < master.size(); ++i) sum += distance(master[i], client[i]);
  return sum / static_cast<double>(master.size());
}

SampleStats sample_stats(const std::vector<double>& values) {
  SampleStats s;
  s.n = values.size();
  if (values.empty()) return s;
  // Offsets from the first sample keep identical inputs exact.
  const double ref = values.front();
  double sum = 0.0;
  for (double v : values) sum += v - ref;
  const double shift = sum / static_cast<double>(s.n);
  s.mean = ref + shift;
  double sq = 0.0;
  for (double v : values) sq += (v - ref - shift) * (v - ref - shift);
  s.stddev = std::sqrt(sq / static_cast<double>(s.n));
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

}  // namespace atsim
