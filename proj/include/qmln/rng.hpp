#pragma once

#include <cstdint>

namespace qmln {

// splitmix64 stream. Small state, splittable by construction: stream k of a
// master seed is splitmix64(seed ^ golden*k). Used everywhere randomness is
// needed so results are reproducible across platforms and standard libraries.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  // Full avalanche over (seed, index): nearby seeds and indices land on
  // unrelated start states.
  static SplitMix64 stream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 scramble(seed);
    SplitMix64 derived(scramble.next() ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    return SplitMix64(derived.next());
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace qmln
