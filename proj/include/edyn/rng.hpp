#pragma once

#include <cmath>
#include <cstdint>

namespace edyn {

// Counter-based random stream keyed by (seed, walker_id, step_index).
// Every draw is a pure function of the key and a draw counter, so results
// are independent of worker count and scheduling.
class RandomStream {
public:
  RandomStream(std::uint64_t seed, std::uint64_t walker_id,
               std::uint64_t step_index)
      : key_(mix(mix(mix(0x9e3779b97f4a7c15ull ^ seed) + walker_id) +
                 step_index)) {}

  double uniform() { return to_unit(next()); }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // Box-Muller; u1 strictly positive.
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925287 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t next() { return mix(key_ + (++counter_)); }

  static double to_unit(std::uint64_t v) {
    return (v >> 11) * 0x1.0p-53;  // [0,1)
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace edyn
