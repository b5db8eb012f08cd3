#pragma once

// Deterministic vector math and randomness shared by every other module.
//
// All reductions accumulate in double. The random generator is xoshiro256**
// (Blackman & Vigna) seeded through SplitMix64; integer draws use rejection
// sampling, so the integer stream and everything derived from it (shuffles,
// choices) is bit-identical on every platform. Gaussian draws use the
// Box-Muller transform on top of that stream.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tripdist/errors.hpp"

namespace tripdist {

using Vector = std::vector<double>;

namespace detail {

inline void require_same_dim(std::span<const double> a, std::span<const double> b,
                             const char* op) {
  if (a.size() != b.size()) {
    throw ContractViolation(std::string(op) + ": dimension mismatch (" +
                            std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace detail

inline double dot(std::span<const double> a, std::span<const double> b) {
  detail::require_same_dim(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline double sq_euclidean(std::span<const double> a, std::span<const double> b) {
  detail::require_same_dim(a, b, "sq_euclidean");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
  detail::require_same_dim(a, b, "cosine_distance");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateInput("cosine_distance: zero-norm input");
  const double cos = dot(a, b) / (na * nb);
  // Rounding can push |cos| a hair past 1.
  return 1.0 - std::clamp(cos, -1.0, 1.0);
}

inline Vector l2_normalize(std::span<const double> a) {
  const double n = l2_norm(a);
  if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateInput("l2_normalize: zero-norm input");
  Vector out(a.begin(), a.end());
  for (double& v : out) v /= n;
  return out;
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

// SplitMix64 step; also used to expand seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Labeled sub-seed: the same (seed, label) always yields the same child seed,
// and different labels give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t state = seed ^ h;
  return splitmix64(state);
}

// xoshiro256** generator. Single-owner mutable state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). Lemire's multiply-shift with rejection.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw ContractViolation("Rng::uniform_index: n must be >= 1");
    const std::uint64_t range = static_cast<std::uint64_t>(n);
    std::uint64_t x = next_u64();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * range;
    auto low = static_cast<std::uint64_t>(m);
    if (low < range) {
      const std::uint64_t threshold = (0 - range) % range;
      while (low < threshold) {
        x = next_u64();
        m = static_cast<unsigned __int128>(x) * range;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::size_t>(m >> 64);
  }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t seed_;
  std::uint64_t s_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline std::size_t rng_choice(Rng& rng, std::size_t n) { return rng.uniform_index(n); }

// Fisher-Yates, back to front.
template <typename T>
void rng_shuffle(Rng& rng, std::span<T> items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(items[i - 1], items[j]);
  }
}

inline std::vector<std::size_t> rng_permutation(Rng& rng, std::size_t n) {
  if (n == 0) throw ContractViolation("rng_permutation: n must be >= 1");
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  rng_shuffle(rng, std::span<std::size_t>(p));
  return p;
}

// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> rng_sample_without_replacement(Rng& rng, std::size_t n,
                                                               std::size_t k) {
  if (k > n) throw CapacityError("rng_sample_without_replacement: k > n");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace tripdist
