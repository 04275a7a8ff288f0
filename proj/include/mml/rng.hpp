#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mml {

/// Deterministic splitmix64 stream. The same seed yields the same sequence
/// on every platform, which the run-level determinism contract depends on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one draw per call, pairs not cached).
  double normal();

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

/// FNV-1a over a label mixed with a base seed; used to derive independent
/// named substreams (init, shuffle-per-epoch, step kinds, ...) from one
/// run seed so that resume-from-checkpoint never needs a saved stream cursor.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                          std::uint64_t index = 0);

}  // namespace mml
