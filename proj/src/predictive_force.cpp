#include "atsim/predictive_force.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace atsim {

namespace {

// Ranges are floored here so a zero reading does not divide by zero.
constexpr double kMinRange = 1e-6;
constexpr double kBoundaryTol = 1e-9;

}  // namespace

std::string_view to_string(ForceLaw law) {
  return law == ForceLaw::Literal ? "literal" : "inverse-range";
}

ForceLaw force_law_from_string(std::string_view name) {
  if (name == "inverse-range") return ForceLaw::InverseRange;
  if (name == "literal") return ForceLaw::Literal;
  throw std::invalid_argument("unknown force law: " + std::string(name));
}

void ForceParams::validate() const {
  if (!(r_o > 0.0 && f_th > 0.0 && w_turn > 0.0)) {
    throw std::invalid_argument("r_o, f_th and w_turn must be positive");
  }
  if (v_nominal < 0.0 || d_stop < 0.0 || k_safe < 0.0) {
    throw std::invalid_argument("v_nominal, d_stop and k_safe must be non-negative");
  }
  for (double g : k) {
    if (!(g > 0.0)) throw std::invalid_argument("force gains must be positive");
  }
}

double ForceParams::gain(std::size_t ray, std::size_t n_rays) const {
  if (k.empty()) return r_o;
  if (k.size() == 1) return k.front();
  if (k.size() != n_rays) {
    throw std::invalid_argument("per-ray gain vector has " + std::to_string(k.size()) +
                                " entries for a " + std::to_string(n_rays) + "-ray scan");
  }
  return k[ray];
}

ForceVector compute_force(const LaserScan& scan, const ForceParams& params) {
  if (scan.ranges.empty()) throw std::invalid_argument("empty scan");
  const std::size_t n = scan.size();
  ForceVector out;
  out.stamp = scan.stamp;
  out.f.resize(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = scan.ranges[i];
    double f = 0.0;
    if (std::abs(r - params.r_o) <= kBoundaryTol) {
      f = 1.0;
    } else if (r < params.r_o) {
      const double k = params.gain(i, n);
      if (params.law == ForceLaw::InverseRange) {
        f = k / std::max(r, kMinRange);
      } else {
        f = k / std::max(params.r_o - r, kMinRange);
      }
    }
    out.f[i] = f;
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (out.f[i] > out.f[best]) {
      best = i;
    } else if (out.f[i] == out.f[best] &&
               std::abs(scan.bearing(i)) < std::abs(scan.bearing(best))) {
      best = i;
    }
  }
  out.argmax_index = best;
  out.max_f = out.f[best];
  out.argmax_bearing = scan.bearing(best);
  return out;
}

double min_forward_range(const LaserScan& scan, double half_width) {
  double d = scan.range_max;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (std::abs(scan.bearing(i)) <= half_width + 1e-12) d = std::min(d, scan.ranges[i]);
  }
  return d;
}

double safe_speed(double d_min, const ForceParams& params) {
  return std::clamp(params.k_safe * (d_min - params.d_stop), 0.0, params.v_nominal);
}

std::optional<Twist> reactive_twist(const ForceVector& force, const ForceParams& params,
                                    double d_min) {
  if (!(force.max_f >= params.f_th)) return std::nullopt;
  const double side = force.argmax_bearing >= 0.0 ? 1.0 : -1.0;
  return Twist{safe_speed(d_min, params), 0.0, -side * params.w_turn};
}

}  // namespace atsim
