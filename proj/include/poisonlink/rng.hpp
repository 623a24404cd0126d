#pragma once

#include <cmath>
#include <cstdint>

namespace poisonlink {

// Deterministic RNG with explicit sample formulas, so that sequences do not
// depend on the standard library's distribution implementations. Streams are
// derived by seed mixing (fork), never by sharing draw positions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), state_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {
    if (state_ == 0) state_ = 0x9e3779b97f4a7c15ULL;
  }

  uint64_t next_u64() {
    // xorshift64* over a splitmix-initialized state
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545f4914f6cdd1dULL;
  }

  // uniform in [0, 1) with 53-bit resolution
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // integer in [lo, hi] inclusive
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // standard normal, Box-Muller; pairs are cached
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = unit(), u2 = unit();
    while (u1 <= 0.0) u1 = unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Independent child stream; deterministic in (parent seed, id) only.
  Rng fork(uint64_t id) const { return Rng(mix(seed_ + 0x9e3779b97f4a7c15ULL * (id + 1))); }

  uint64_t seed() const { return seed_; }

  static uint64_t mix(uint64_t z) {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  uint64_t seed_;
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace poisonlink
