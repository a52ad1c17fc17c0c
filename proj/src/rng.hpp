#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace prism {

// Deterministic RNG (xoshiro256++ seeded through splitmix64). All randomness
// in the project flows from one root seed via named sub-streams so that
// components (init, dropout, sampling, shuffling) can be varied independently
// without perturbing each other. Sampling helpers are hand-rolled instead of
// <random> distributions so output bytes do not depend on the standard
// library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  // Sub-stream keyed by (root seed, name). Same root + same name -> same
  // stream; distinct names -> statistically independent streams.
  static Rng substream(uint64_t root, std::string_view name) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a over the stream name
    for (unsigned char c : name) {
      h ^= c;
      h *= 1099511628211ull;
    }
    uint64_t x = root;
    return Rng(splitmix64(x) ^ h);
  }

  uint64_t next() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection-free modulo is fine at our scales;
  // determinism matters more than the (tiny) modulo bias.
  uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }

  int range(int lo, int hi_inclusive) {
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi_inclusive - lo + 1)));
  }

  // Box-Muller without the cached spare, so the stream position is a pure
  // function of the number of calls.
  double normal(double mean = 0.0, double sd = 1.0) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(2.0 * M_PI * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t state_[4];
};

}  // namespace prism
