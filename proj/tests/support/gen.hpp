#pragma once

// Hand-rolled generators for property tests. Every property runs a fixed
// number of cases from a fixed seed, so failures reproduce exactly.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "biopsym/geometry.hpp"

namespace gen {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

  biopsym::Vec3 vec_in(const biopsym::Vec3& lo, const biopsym::Vec3& hi) {
    return {uniform(lo.x(), hi.x()), uniform(lo.y(), hi.y()), uniform(lo.z(), hi.z())};
  }
  biopsym::Vec3 unit_vector() {
    for (;;) {
      const biopsym::Vec3 v(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
      const double n = v.norm();
      if (n > 1e-3 && n <= 1.0) return v / n;
    }
  }
  biopsym::Quat rotation() {
    // Shoemake's uniform quaternion.
    const double u1 = uniform(0, 1), u2 = uniform(0, 2 * std::numbers::pi), u3 = uniform(0, 2 * std::numbers::pi);
    const double a = std::sqrt(1 - u1), b = std::sqrt(u1);
    return biopsym::Quat(a * std::sin(u2), a * std::cos(u2), b * std::sin(u3), b * std::cos(u3)).normalized();
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Runs prop(rng, case_index) for n cases. Each case gets its own seed so a
/// failing case can be replayed alone.
template <typename Prop>
void for_all(int n, std::uint64_t seed, Prop&& prop) {
  for (int c = 0; c < n; ++c) {
    Rng rng(seed * 1000003u + static_cast<std::uint64_t>(c));
    prop(rng, c);
  }
}

}  // namespace gen
