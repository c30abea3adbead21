#pragma once

#include <cmath>
#include <cstdint>

namespace mbpi {

// Splittable pseudo-random stream built on the splitmix64 mixer.
//
// substream() derives new streams keyed on up to three integers from the
// parent's *seed*, not from its current position, so per-particle and
// per-chain streams are reproducible under any scheduling or evaluation
// order.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed)
      : origin_(mix(seed ^ 0x5851f42d4c957f2dULL)), state_(origin_) {}

  // Independent stream keyed by (a, b, c).
  RandomStream substream(std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0) const {
    std::uint64_t s = origin_;
    s = mix(s ^ mix(a + 0x9e3779b97f4a7c15ULL));
    s = mix(s ^ mix(b + 0xbf58476d1ce4e5b9ULL));
    s = mix(s ^ mix(c + 0x94d049bb133111ebULL));
    return RandomStream(s, Raw{});
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe to pass to log().
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  // Standard normal via Box-Muller. Always consumes exactly two uniforms so
  // the stream layout does not depend on call history.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

  // Uniform integer in [0, n).
  std::int64_t below(std::int64_t n) {
    const auto k = static_cast<std::int64_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  struct Raw {};
  RandomStream(std::uint64_t origin, Raw) : origin_(origin), state_(origin) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t origin_;
  std::uint64_t state_;
};

}  // namespace mbpi
