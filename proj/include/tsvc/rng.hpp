#ifndef TSVC_RNG_HPP
#define TSVC_RNG_HPP

#include <cstdint>

#include "tsvc/stats.hpp"

namespace tsvc {

/// Splittable counter-based random generator.
///
/// Streams are identified by a key derived from a seed and a chain of child
/// tags, so any piece of work (a bootstrap replicate, a row, a scenario
/// column) can own an independent stream that does not depend on execution
/// order. Equal (seed, tags...) always produces the same draws, on any
/// platform and under any thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed + kGolden)) {}

  /// Derives an independent child stream for the given tag.
  Rng child(std::uint64_t tag) const { return Rng(state_ ^ mix(tag + kTagSalt), 0); }

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  /// Uniform draw strictly inside (0, 1); safe as a quantile-function argument.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal draw via the inverse-CDF method (platform-stable).
  double normal() { return normal_quantile(uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n) via Lemire's multiply-shift reduction.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  Rng(std::uint64_t raw_state, int) : state_(raw_state) {}

  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;
  static constexpr std::uint64_t kTagSalt = 0xd1b54a32d192ed03ull;

  std::uint64_t state_;
};

}  // namespace tsvc

#endif
