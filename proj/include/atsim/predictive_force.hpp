#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "atsim/types.hpp"
#include "atsim/world.hpp"

namespace atsim {

enum class ForceLaw {
  /// f_i = k_i / r_i inside the trigger range.
  InverseRange,
  /// f_i = k_i / (r_o - r_i) inside the trigger range. Kept for comparison only.
  Literal,
};

std::string_view to_string(ForceLaw law);
ForceLaw force_law_from_string(std::string_view name);

struct ForceParams {
  double r_o{0.5};
  /// Empty: k_i = r_o for every ray. One entry: scalar gain. Otherwise one gain per ray.
  std::vector<double> k;
  double f_th{1.0};
  double w_turn{0.5};
  double v_nominal{0.2};
  double d_stop{0.2};
  double k_safe{1.0};
  ForceLaw law{ForceLaw::InverseRange};

  void validate() const;
  double gain(std::size_t ray, std::size_t n_rays) const;
};

struct ForceVector {
  std::vector<double> f;
  double max_f{0.0};
  double argmax_bearing{0.0};
  std::size_t argmax_index{0};
  double stamp{0.0};
};

/// Per-ray predictive force. Throws std::invalid_argument on an empty scan.
ForceVector compute_force(const LaserScan& scan, const ForceParams& params);

/// Minimum range over rays whose bearing lies within +-half_width of straight ahead.
double min_forward_range(const LaserScan& scan, double half_width = kPi / 2.0);

/// Linear speed allowed at obstacle distance d: clamp(k_safe (d - d_stop), 0, v_nominal).
double safe_speed(double d_min, const ForceParams& params);

/// Turn-away twist when max_f >= f_th, nothing otherwise.
std::optional<Twist> reactive_twist(const ForceVector& force, const ForceParams& params,
                                    double d_min);

}  // namespace atsim
