// Deterministic random stream (xoshiro256** seeded via splitmix64).
// std::uniform_*_distribution is implementation-defined, so all draws are
// derived from raw bits here to keep outputs byte-identical across platforms.
#ifndef SEEDSONG_RNG_HPP
#define SEEDSONG_RNG_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace seedsong {

namespace detail {
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
inline uint64_t rotl64(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace detail

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) {
    uint64_t sm = seed;
    for (auto& w : state_) w = detail::splitmix64(sm);
  }

  uint64_t next() {
    const uint64_t result = detail::rotl64(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n).
  size_t next_below(size_t n) {
    if (n == 0) throw std::invalid_argument("next_below(0)");
    return static_cast<size_t>(next() % n);
  }

  // Index drawn proportionally to nonnegative weights; requires a positive sum.
  size_t weighted_choice(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) {
      throw std::invalid_argument("weighted_choice: nonpositive weight sum");
    }
    const double u = next_double() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    // Rounding can push u past the last cumulative bin.
    for (size_t i = weights.size(); i-- > 0;) {
      if (weights[i] > 0.0) return i;
    }
    return weights.size() - 1;
  }

  // Independent stream derived from a seed and salts; pure function of its
  // arguments, so draw order elsewhere cannot perturb it.
  static Rng derive(uint64_t seed, uint64_t salt_a, uint64_t salt_b = 0,
                    uint64_t salt_c = 0) {
    uint64_t sm = seed;
    uint64_t h = detail::splitmix64(sm);
    sm ^= salt_a * 0x9e3779b97f4a7c15ULL;
    h ^= detail::splitmix64(sm);
    sm ^= salt_b * 0xc2b2ae3d27d4eb4fULL;
    h ^= detail::splitmix64(sm);
    sm ^= salt_c * 0x165667b19e3779f9ULL;
    h ^= detail::splitmix64(sm);
    return Rng(h);
  }

 private:
  uint64_t state_[4];
};

}  // namespace seedsong

#endif  // SEEDSONG_RNG_HPP
