#include <doctest.h>

#include <random>

#include "atsim/predictive_force.hpp"

using namespace atsim;

namespace {

LaserScan make_scan(std::vector<double> ranges, double range_max = 5.0) {
  LaserScan s;
  s.angle_min = -kPi;
  s.angle_increment = kTwoPi / static_cast<double>(ranges.size());
  s.range_max = range_max;
  s.ranges = std::move(ranges);
  return s;
}

// Piecewise law written out directly from its three cases.
double force_oracle(double r, double r_o, double k) {
  if (r > r_o + 1e-9) return 0.0;
  if (r >= r_o - 1e-9) return 1.0;
  return k / r;
}

}  // namespace

TEST_CASE("force law worked examples") {
  ForceParams p;
  auto f = compute_force(make_scan({0.5, 3.0, 0.25, 5.0}), p);
  CHECK(f.f[0] == 1.0);
  CHECK(f.f[1] == 0.0);
  CHECK(f.f[2] == doctest::Approx(2.0));
  CHECK(f.f[3] == 0.0);
  CHECK(f.max_f == doctest::Approx(2.0));
  CHECK(f.argmax_index == 2);
  CHECK_THROWS_AS(compute_force(LaserScan{}, p), std::invalid_argument);

  // Boundary continuity with default gains.
  for (double delta : {1e-3, 1e-5, 1e-7}) {
    const auto near = compute_force(make_scan({0.5 - delta}), p);
    CHECK(std::abs(near.f[0] - 1.0) < 3 * delta);
  }
}

TEST_CASE("force law gains and literal variant") {
  ForceParams p;
  p.k = {0.25};
  CHECK(compute_force(make_scan({0.25}), p).f[0] == doctest::Approx(1.0));
  p.k = {0.1, 0.2};
  const auto per_ray = compute_force(make_scan({0.1, 0.1}), p);
  CHECK(per_ray.f[0] == doctest::Approx(1.0));
  CHECK(per_ray.f[1] == doctest::Approx(2.0));
  p.k = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(compute_force(make_scan({0.1, 0.1}), p), std::invalid_argument);

  ForceParams lit;
  lit.law = ForceLaw::Literal;
  // k / (r_o - r): largest just inside the boundary, finite at contact.
  const auto f = compute_force(make_scan({0.49, 0.01}), lit);
  CHECK(f.f[0] == doctest::Approx(50.0));
  CHECK(f.f[1] == doctest::Approx(0.5 / 0.49));
  CHECK(force_law_from_string("literal") == ForceLaw::Literal);
  CHECK_THROWS_AS(force_law_from_string("nope"), std::invalid_argument);
}

TEST_CASE("argmax ties prefer the smallest bearing magnitude, then the smallest index") {
  ForceParams p;
  // 8 rays: bearings -pi(=pi), -3pi/4, -pi/2, -pi/4, 0, pi/4, pi/2, 3pi/4
  auto f = compute_force(make_scan({0.3, 5, 5, 0.3, 5, 0.3, 5, 5}), p);
  CHECK(f.argmax_index == 3);
  CHECK(f.argmax_bearing == doctest::Approx(-kPi / 4));
  f = compute_force(make_scan({5, 5, 5, 5, 0.3, 5, 5, 5}), p);
  CHECK(f.argmax_bearing == 0.0);
}

TEST_CASE("reactive twist worked examples") {
  ForceParams p;
  ForceVector f;
  f.max_f = 2.0;
  f.argmax_bearing = 0.3;
  auto t = reactive_twist(f, p, 1.0);
  REQUIRE(t);
  CHECK(t->w == -0.5);
  CHECK(t->v == doctest::Approx(0.2));
  f.argmax_bearing = -0.3;
  CHECK(reactive_twist(f, p, 1.0)->w == 0.5);
  f.argmax_bearing = 0.0;
  CHECK(reactive_twist(f, p, 1.0)->w == -0.5);
  CHECK(reactive_twist(f, p, 0.2)->v == 0.0);
  CHECK(reactive_twist(f, p, 0.3)->v == doctest::Approx(0.1));
  f.max_f = 0.0;
  CHECK_FALSE(reactive_twist(f, p, 1.0));
  f.max_f = 1.0;
  CHECK(reactive_twist(f, p, 1.0));
}

TEST_CASE("min_forward_range looks only at the front half") {
  // 4 rays: -pi(back), -pi/2, 0, pi/2
  const auto s = make_scan({0.1, 2.0, 3.0, 1.5});
  CHECK(min_forward_range(s) == 1.5);
  CHECK(min_forward_range(make_scan({0.1, 5.0, 5.0, 5.0})) == 5.0);
}

TEST_CASE("force law properties over randomized scans") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> range(0.0, 5.0);
  std::uniform_real_distribution<double> near(0.0, 0.6);
  std::uniform_int_distribution<int> size(1, 720);
  ForceParams p;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = size(rng);
    std::vector<double> r(static_cast<std::size_t>(n));
    for (auto& x : r) x = (trial % 2) ? near(rng) : range(rng);
    if (trial % 7 == 0) r[0] = p.r_o;
    const auto scan = make_scan(r);
    const auto f = compute_force(scan, p);
    double max_f = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(f.f[i] >= 0.0);
      if (r[i] > 1e-6) CHECK(f.f[i] == doctest::Approx(force_oracle(r[i], p.r_o, p.r_o)));
      if (r[i] > p.r_o) CHECK(f.f[i] == 0.0);
      max_f = std::max(max_f, f.f[i]);
    }
    CHECK(f.max_f == max_f);

    // Anti-monotone: shrinking one range never lowers its force.
    auto shrunk = r;
    const std::size_t j = static_cast<std::size_t>(trial) % r.size();
    shrunk[j] *= 0.5;
    CHECK(compute_force(make_scan(shrunk), p).f[j] >= f.f[j]);

    const double d = min_forward_range(scan);
    if (auto t = reactive_twist(f, p, d)) {
      CHECK(f.max_f >= p.f_th);
      CHECK(std::abs(t->w) == p.w_turn);
      CHECK(t->v >= 0.0);
      CHECK(t->v <= p.v_nominal);
    } else {
      CHECK(f.max_f < p.f_th);
    }

    // Silence: nothing within r_o means no output.
    const auto clear = compute_force(make_scan(std::vector<double>(r.size(), 5.0)), p);
    CHECK_FALSE(reactive_twist(clear, p, 5.0));
  }
}
