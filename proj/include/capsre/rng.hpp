#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace capsre {

/// SplitMix64 generator. Tiny state, so it serializes into checkpoints as a
/// single integer and derived streams are cheap to spawn.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent stream keyed by `tag`; does not advance this generator.
  Rng fork(std::uint64_t tag) const;

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

/// Stateless SplitMix64 finalizer, used for seed mixing.
std::uint64_t mix64(std::uint64_t x);

}  // namespace capsre
