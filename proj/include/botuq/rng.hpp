#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "botuq/errors.hpp"
#include "botuq/types.hpp"

namespace botuq {

// Deterministic random stream.  All stochastic code in the library draws
// through this class rather than <random> distributions, so that a given seed
// reproduces bit-identical runs across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Child stream keyed by a label.  Children derived with distinct labels are
  // independent of each other and of the parent's consumption order.
  Rng derive(std::string_view label) const {
    return Rng(mix_(seed_ ^ fnv1a_(label)));
  }

  // Indexed variant for per-epoch / per-item streams.
  Rng derive(std::string_view label, std::uint64_t index) const {
    return Rng(mix_(mix_(seed_ ^ fnv1a_(label)) + index));
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller, caching the second draw.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1] so log is finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, bound) by rejection; bound must be positive.
  std::uint64_t integer(std::uint64_t bound) {
    if (bound == 0) throw ValidationError("Rng::integer: bound must be positive");
    std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      std::uint64_t x = gen_();
      if (x >= threshold) return x % bound;
    }
  }

  template <typename Scalar>
  Matrix<Scalar> normal_matrix(Index rows, Index cols) {
    Matrix<Scalar> out(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) out(i, j) = static_cast<Scalar>(normal());
    return out;
  }

  template <typename Scalar>
  Vector<Scalar> normal_vector(Index n) {
    Vector<Scalar> out(n);
    for (Index i = 0; i < n; ++i) out(i) = static_cast<Scalar>(normal());
    return out;
  }

  // Fisher-Yates, unbiased.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(integer(i + 1));
      std::swap(items[i], items[j]);
    }
  }

 private:
  static std::uint64_t fnv1a_(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  // splitmix64 finalizer; spreads label/seed combinations over the full state
  // space so sibling streams do not overlap in practice.
  static std::uint64_t mix_(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace botuq
