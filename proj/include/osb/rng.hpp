#pragma once

#include <cstdint>
#include <initializer_list>

namespace osb {

// Deterministic, platform-independent random number generation.
//
// Sampling throughout the tool derives one independent stream per logical
// unit (episode, baseline instance, ...) by hashing the unit's key fields
// together with the user seed. Results are therefore identical no matter in
// which order or on how many threads the units are processed.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Order-sensitive combination of key parts into a single stream seed.
inline std::uint64_t mix_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x8C7F0AAC97C4AA2Full;
  for (std::uint64_t p : parts) {
    std::uint64_t s = h ^ p;
    h = splitmix64_next(s);
  }
  return h;
}

// Stream domains, mixed into the key so that e.g. episode sampling and the
// random baseline never reuse each other's draws for the same key fields.
enum class RngDomain : std::uint64_t {
  episode_sampling = 0x45505300,   // reference draws per episode
  training_reference = 0x54524E00, // training-minibatch reference choice
  random_baseline = 0x42415300,    // baseline box shifts and scores
  rpn_target_sampling = 0x52504E00,
  test_data = 0x54535400,          // synthetic data generation in tests
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // Unbiased uniform integer in [0, n); n must be >= 1.
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling on the top of the range keeps the draw exact.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit && limit != 0);
    return v % n;
  }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Uniform double in [0, 1) with 53 significant bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

 private:
  std::uint64_t state_;
};

inline Rng make_rng(std::uint64_t seed, RngDomain domain,
                    std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = mix_key({seed, static_cast<std::uint64_t>(domain)});
  for (std::uint64_t p : key) h = mix_key({h, p});
  return Rng(h);
}

}  // namespace osb
