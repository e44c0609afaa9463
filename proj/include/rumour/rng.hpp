#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace rumour {

// Deterministic RNG with hand-rolled distributions. std::mt19937_64 output is
// specified by the standard; the distributions are not, so we roll our own to
// keep results identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n). Modulo bias is < 2^-53 for any n that fits in memory.
  std::uint64_t below(std::uint64_t n) { return next() % n; }

  std::int64_t range(std::int64_t lo, std::int64_t hi_inclusive) {
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates, uniform over permutations for a fixed seed.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derive an independent substream; mixes the stream id through the engine.
  Rng fork(std::uint64_t stream) {
    std::uint64_t base = next();
    return Rng(base ^ (stream * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rumour
