#pragma once

// Word-sized modular arithmetic: centered reduction, Barrett and Shoup
// multiplication, primality testing and NTT-friendly prime generation.

#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "evfc/errors.hpp"

namespace evfc {

using u128 = unsigned __int128;
using i128 = __int128;

/// Centered reduction x mod p = x - floor((x + p/2) / p) * p, landing in
/// [-p/2, p/2). Uses exact integer arithmetic (floor of a half-integer
/// shift is computed as floor((2x + p) / 2p)).
inline std::int64_t center_mod(i128 x, std::int64_t p) {
  if (p < 2) throw OutOfRange("center_mod: modulus must be >= 2");
  const i128 num = 2 * x + p;
  const i128 den = 2 * static_cast<i128>(p);
  i128 q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return static_cast<std::int64_t>(x - q * p);
}

// Branch-free conditional corrections. Residues are random, so a branch here
// mispredicts half the time (gcc -O3 emits one for the ternary form).
inline std::uint64_t sub_if_geq(std::uint64_t x, std::uint64_t p) noexcept {
  return x - (p & (std::uint64_t{0} - static_cast<std::uint64_t>(x >= p)));
}
inline std::uint64_t sub_mod(std::uint64_t u, std::uint64_t v, std::uint64_t p) noexcept {
  return u - v + (p & (std::uint64_t{0} - static_cast<std::uint64_t>(u < v)));
}

/// A word-sized modulus with precomputed Barrett constants. Values are
/// handled as unsigned residues in [0, p).
class Modulus {
 public:
  Modulus() = default;
  explicit Modulus(std::uint64_t value) : value_(value) {
    if (value < 2 || value >= (std::uint64_t{1} << 62)) {
      throw InvalidModulus("modulus must lie in [2, 2^62)");
    }
    const u128 ratio = ~u128{0} / value;  // floor((2^128 - 1) / p)
    ratio_lo_ = static_cast<std::uint64_t>(ratio);
    ratio_hi_ = static_cast<std::uint64_t>(ratio >> 64);
    bits_ = 64 - std::countl_zero(value);
  }

  std::uint64_t value() const noexcept { return value_; }
  int bit_count() const noexcept { return bits_; }

  std::uint64_t reduce(std::uint64_t x) const noexcept {
    return x >= value_ ? reduce128(x) : x;
  }

  std::uint64_t reduce128(u128 x) const noexcept {
    const auto xlo = static_cast<std::uint64_t>(x);
    const auto xhi = static_cast<std::uint64_t>(x >> 64);
    const u128 a = static_cast<u128>(xlo) * ratio_lo_;
    const u128 b = static_cast<u128>(xlo) * ratio_hi_ + static_cast<std::uint64_t>(a >> 64);
    const u128 c = static_cast<u128>(xhi) * ratio_lo_ + static_cast<std::uint64_t>(b);
    const std::uint64_t qhat =
        xhi * ratio_hi_ + static_cast<std::uint64_t>(b >> 64) + static_cast<std::uint64_t>(c >> 64);
    std::uint64_t r = sub_if_geq(sub_if_geq(xlo - qhat * value_, value_), value_);
    while (r >= value_) r -= value_;
    return r;
  }

  std::uint64_t add(std::uint64_t a, std::uint64_t b) const noexcept {
    return sub_if_geq(a + b, value_);
  }
  std::uint64_t sub(std::uint64_t a, std::uint64_t b) const noexcept {
    return sub_mod(a, b, value_);
  }
  std::uint64_t negate(std::uint64_t a) const noexcept { return a == 0 ? 0 : value_ - a; }
  std::uint64_t mul(std::uint64_t a, std::uint64_t b) const noexcept {
    return reduce128(static_cast<u128>(a) * b);
  }

  std::uint64_t pow(std::uint64_t base, std::uint64_t exp) const noexcept {
    std::uint64_t result = 1 % value_;
    base = reduce(base);
    while (exp != 0) {
      if (exp & 1) result = mul(result, base);
      base = mul(base, base);
      exp >>= 1;
    }
    return result;
  }

  /// Inverse modulo a prime modulus (Fermat).
  std::uint64_t inverse(std::uint64_t a) const {
    a = reduce(a);
    if (a == 0) throw OutOfRange("zero has no modular inverse");
    return pow(a, value_ - 2);
  }

  /// Maps a signed integer into [0, p).
  std::uint64_t from_signed(std::int64_t x) const noexcept {
    if (x >= 0) return reduce(static_cast<std::uint64_t>(x));
    const std::uint64_t m = reduce(static_cast<std::uint64_t>(-(x + 1)) + 1);
    return negate(m);
  }

  /// Centered representative in [-p/2, p/2) of a residue in [0, p).
  std::int64_t centered(std::uint64_t r) const noexcept {
    // r >= ceil(p/2) maps to r - p; for odd p that is r > p/2.
    return (2 * r >= value_) ? static_cast<std::int64_t>(r) - static_cast<std::int64_t>(value_)
                             : static_cast<std::int64_t>(r);
  }

  friend bool operator==(const Modulus& a, const Modulus& b) noexcept { return a.value_ == b.value_; }

 private:
  std::uint64_t value_ = 0;
  std::uint64_t ratio_lo_ = 0;
  std::uint64_t ratio_hi_ = 0;
  int bits_ = 0;
};

/// Multiplication by a fixed operand using Shoup's precomputed quotient.
struct ShoupOperand {
  std::uint64_t operand = 0;
  std::uint64_t quotient = 0;  // floor(operand * 2^64 / p)

  ShoupOperand() = default;
  ShoupOperand(std::uint64_t w, const Modulus& p)
      : operand(w), quotient(static_cast<std::uint64_t>((static_cast<u128>(w) << 64) / p.value())) {}
};

inline std::uint64_t mul_shoup(std::uint64_t a, const ShoupOperand& w, std::uint64_t p) noexcept {
  const auto q = static_cast<std::uint64_t>((static_cast<u128>(a) * w.quotient) >> 64);
  return sub_if_geq(a * w.operand - q * p, p);
}

/// Deterministic Miller-Rabin for 64-bit integers.
inline bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  constexpr std::array<std::uint64_t, 12> kBases{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  for (auto b : kBases) {
    if (n % b == 0) return n == b;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  auto mulmod = [n](std::uint64_t a, std::uint64_t b) {
    return static_cast<std::uint64_t>(static_cast<u128>(a) * b % n);
  };
  auto powmod = [&](std::uint64_t a, std::uint64_t e) {
    std::uint64_t r = 1;
    while (e) {
      if (e & 1) r = mulmod(r, a);
      a = mulmod(a, a);
      e >>= 1;
    }
    return r;
  };
  for (auto a : kBases) {
    std::uint64_t x = powmod(a, d);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mulmod(x, x);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

/// Largest primes of exactly `bits` bits with p = 1 (mod modulus_step),
/// skipping anything in `exclude`. Scans downward from 2^bits.
inline std::vector<std::uint64_t> ntt_primes(int bits, std::size_t count, std::uint64_t step,
                                             const std::vector<std::uint64_t>& exclude = {}) {
  if (bits < 2 || bits > 61) throw InvalidModulus("prime bit length must be in [2, 61]");
  std::vector<std::uint64_t> out;
  const std::uint64_t upper = std::uint64_t{1} << bits;
  const std::uint64_t lower = std::uint64_t{1} << (bits - 1);
  if (upper <= step) throw InvalidModulus("no " + std::to_string(bits) + "-bit prime = 1 mod " + std::to_string(step));
  std::uint64_t candidate = (upper - 1) / step * step + 1;
  if (candidate >= upper) candidate -= step;
  while (out.size() < count && candidate >= lower) {
    bool excluded = false;
    for (auto e : exclude) excluded |= (e == candidate);
    if (!excluded && is_prime(candidate)) out.push_back(candidate);
    if (candidate < step) break;
    candidate -= step;
  }
  if (out.size() < count) {
    throw InvalidModulus("not enough " + std::to_string(bits) + "-bit primes = 1 mod " + std::to_string(step));
  }
  return out;
}

/// Distinct prime factors of n (trial division; n is at most 62 bits and
/// n - 1 of an NTT prime is smooth in its power-of-two part).
inline std::vector<std::uint64_t> prime_factors(std::uint64_t n) {
  std::vector<std::uint64_t> f;
  if (n % 2 == 0) {
    f.push_back(2);
    while (n % 2 == 0) n /= 2;
  }
  for (std::uint64_t d = 3; d * d <= n; d += 2) {
    if (n % d == 0) {
      f.push_back(d);
      while (n % d == 0) n /= d;
    }
    if (d > 3 && is_prime(n)) break;
  }
  if (n > 1) f.push_back(n);
  return f;
}

/// Smallest generator of the multiplicative group mod a prime p.
inline std::uint64_t smallest_generator(const Modulus& p) {
  const std::uint64_t order = p.value() - 1;
  const auto factors = prime_factors(order);
  for (std::uint64_t g = 2; g < p.value(); ++g) {
    bool ok = true;
    for (auto f : factors) {
      if (p.pow(g, order / f) == 1) {
        ok = false;
        break;
      }
    }
    if (ok) return g;
  }
  throw InvalidModulus("no generator found");
}

/// Smallest primitive `order`-th root of unity mod p. Requires order | p-1.
inline std::uint64_t minimal_primitive_root(const Modulus& p, std::uint64_t order) {
  if (order == 0 || (p.value() - 1) % order != 0) {
    throw InvalidModulus("modulus " + std::to_string(p.value()) + " has no primitive " +
                         std::to_string(order) + "-th root of unity");
  }
  const std::uint64_t root = p.pow(smallest_generator(p), (p.value() - 1) / order);
  if (order == 1) return 1;
  // Primitive roots of a power-of-two order are root^k for odd k; for other
  // orders we only need one, so keep the generator's.
  if ((order & (order - 1)) != 0) return root;
  const std::uint64_t step = p.mul(root, root);
  std::uint64_t current = root;
  std::uint64_t best = root;
  for (std::uint64_t k = 1; k < order; k += 2) {
    if (current < best) best = current;
    current = p.mul(current, step);
  }
  return best;
}

}  // namespace evfc
