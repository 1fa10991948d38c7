#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "evfc/ring.hpp"

namespace evfc {

/// Randomness source for key generation and encryption. Seeded runs are
/// reproducible; unseeded runs draw the seed from std::random_device.
/// Not a CSPRNG: fine for simulation, not for deployment.
class Rng {
 public:
  Rng() : engine_(fresh_seed()) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  explicit Rng(std::optional<std::uint64_t> seed) : engine_(seed ? *seed : fresh_seed()) {}

  std::uint64_t uniform(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(engine_);
  }
  double uniform_real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

  /// Uniform over {-1, 0, 1}.
  std::int64_t ternary() { return static_cast<std::int64_t>(uniform(3)) - 1; }

  /// Rounded Gaussian, tails cut at 6 sigma.
  std::int64_t gaussian(double sigma) {
    std::normal_distribution<double> dist(0.0, sigma);
    const double bound = 6.0 * sigma;
    for (;;) {
      const double x = dist(engine_);
      if (std::abs(x) <= bound) return std::llround(x);
    }
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  static std::uint64_t fresh_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  std::mt19937_64 engine_;
};

inline std::vector<std::int64_t> sample_ternary(std::size_t n, Rng& rng) {
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = rng.ternary();
  return v;
}

inline std::vector<std::int64_t> sample_gaussian(std::size_t n, double sigma, Rng& rng) {
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = rng.gaussian(sigma);
  return v;
}

/// Uniform element of R_Q; uniform residues are uniform in either form, so
/// the result is tagged as NTT form directly.
inline RingPoly sample_uniform_ntt(const BasisPtr& basis, Rng& rng) {
  RingPoly p(basis, PolyForm::ntt);
  for (std::size_t i = 0; i < p.residue_count(); ++i) {
    const std::uint64_t q = basis->modulus(i).value();
    for (auto& v : p.residue(i)) v = rng.uniform(q);
  }
  return p;
}

}  // namespace evfc
