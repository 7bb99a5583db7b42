#ifndef SHRINKLAB_RANDOM_H_
#define SHRINKLAB_RANDOM_H_

#include <cstdint>
#include <limits>

namespace shrinklab {

// SplitMix64 finalizer.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent seed from a parent seed and a list of keys.
template <typename... Keys>
constexpr uint64_t derive_seed(uint64_t seed, Keys... keys) {
  uint64_t h = mix64(seed);
  ((h = mix64(h ^ mix64(static_cast<uint64_t>(keys)))), ...);
  return h;
}

// Counter-based generator: the n-th output is a pure function of (key, n), so
// streams keyed by e.g. (seed, component, point) never interact. Satisfies
// UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = uint64_t;

  explicit CounterRng(uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return mix64(key_ ^ mix64(counter_++)); }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace shrinklab

#endif  // SHRINKLAB_RANDOM_H_
