#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace kgt {

namespace detail {
// splitmix64; decorrelates nearby seeds before they reach the engine.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Deterministic random source. The engine is std::mt19937_64 (bit-exact per
// the standard); all distributions are hand-rolled here so sampled values do
// not depend on libstdc++ internals. Seeds are mixed first: raw sequential
// seeds give mt19937_64 visibly correlated first outputs.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(detail::mix64(seed)) {
    engine_.discard(4);
  }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, n). Rejection sampling keeps it exactly uniform.
  uint64_t uniform_below(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  size_t index(size_t n) { return static_cast<size_t>(uniform_below(n)); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool coin(double p = 0.5) { return uniform() < p; }

  // Box-Muller, no spare cached so serialized state is just the engine.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  // First `count` elements of a random permutation of v (Fisher-Yates prefix).
  template <typename T>
  std::vector<T> sample_without_replacement(std::vector<T> v, size_t count) {
    count = std::min(count, v.size());
    for (size_t i = 0; i < count; ++i) {
      const size_t j = i + index(v.size() - i);
      std::swap(v[i], v[j]);
    }
    v.resize(count);
    return v;
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void restore(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

 private:
  std::mt19937_64 engine_;
};

// Mixes a base seed with stream tags; used to hand out independent,
// reproducible substreams per (epoch, sample, purpose).
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0,
                            uint64_t c = 0) {
  uint64_t z = base;
  for (uint64_t tag : {a, b, c}) {
    z += 0x9e3779b97f4a7c15ull + tag;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z = z ^ (z >> 31);
  }
  return z;
}

}  // namespace kgt
