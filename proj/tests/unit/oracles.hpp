#pragma once

// Independent reference computations used only by tests. None of these
// call into the code paths they check.

#include <cstdint>
#include <vector>

#include "evfc/modarith.hpp"

namespace evfc::oracle {

/// x - floor((x + p/2) / p) * p evaluated with exact rational arithmetic.
inline std::int64_t center_mod_floor(std::int64_t x, std::int64_t p) {
  // floor((2x + p) / (2p)) with floor division on signed integers
  const std::int64_t num = 2 * x + p;
  const std::int64_t den = 2 * p;
  std::int64_t q = num / den;
  if (num % den != 0 && num < 0) --q;
  return x - q * p;
}

/// O(N^2) product in Z_p[X]/(X^N + 1), centered output.
inline std::vector<std::int64_t> negacyclic_schoolbook(const std::vector<std::int64_t>& a,
                                                       const std::vector<std::int64_t>& b, std::int64_t p) {
  const std::size_t n = a.size();
  std::vector<__int128> acc(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const __int128 prod = static_cast<__int128>(a[i]) * b[j];
      if (i + j < n) {
        acc[i + j] += prod;
      } else {
        acc[i + j - n] -= prod;
      }
    }
  }
  std::vector<std::int64_t> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    __int128 r = acc[k] % p;
    if (r < 0) r += p;
    if (2 * r >= p) r -= p;
    out[k] = static_cast<std::int64_t>(r);
  }
  return out;
}

/// Horner evaluation of a polynomial with residues in [0, p) at x.
inline std::uint64_t evaluate(const std::vector<std::uint64_t>& a, std::uint64_t x, const Modulus& p) {
  unsigned __int128 acc = 0;
  for (std::size_t k = a.size(); k-- > 0;) acc = (acc * x + a[k]) % p.value();
  return static_cast<std::uint64_t>(acc);
}

/// Cyclic left shift by `step`.
inline std::vector<std::int64_t> rotate_left(const std::vector<std::int64_t>& v, std::size_t step) {
  std::vector<std::int64_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[(i + step) % v.size()];
  return out;
}

/// Brute-force weighted and total brightness over camera coordinates.
struct BrightnessSums {
  std::int64_t weighted = 0;
  std::int64_t total = 0;
};

inline BrightnessSums brightness_sums(const std::vector<int>& pixels) {
  BrightnessSums s;
  const auto n = static_cast<std::int64_t>(pixels.size());
  for (std::int64_t idx = 0; idx < n; ++idx) {
    const std::int64_t i = idx - n / 2;
    s.weighted += i * pixels[static_cast<std::size_t>(idx)];
    s.total += pixels[static_cast<std::size_t>(idx)];
  }
  return s;
}

}  // namespace evfc::oracle
