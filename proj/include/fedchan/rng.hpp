#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fedchan {

// Seed derivation and sampling helpers. All distributions are implemented
// directly on top of std::mt19937_64 so that generated streams are
// bit-identical across platforms and standard library versions (the std::
// distribution adapters are implementation defined).

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and a stream tag.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ (splitmix64(tag) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53 bits of mantissa.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inclusive integer range. Modulo bias is irrelevant at the ranges used here.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1u;
    return lo + static_cast<std::int64_t>(gen_() % span);
  }

  // Exponential inter-arrival gap with the given rate (events per unit time).
  double exponential(double rate) {
    return -std::log(1.0 - uniform01()) / rate;
  }

  // Box-Muller; the spare variate is discarded to keep call sites decoupled.
  double gaussian(double mean, double stddev) {
    const double u1 = static_cast<double>((gen_() >> 11) + 1u) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 gen_;
};

// Deterministic Fisher-Yates permutation of {0, ..., n-1}.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace fedchan
