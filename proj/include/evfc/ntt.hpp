#pragma once

// Negacyclic number theoretic transform over Z_p[X]/(X^N + 1).
//
// The forward transform evaluates a polynomial at the odd powers of a
// primitive 2N-th root psi. Output index k holds a(psi^(2*bitrev(k) + 1)),
// where bitrev reverses log2(N) bits. The inverse undoes it exactly.

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "evfc/modarith.hpp"

namespace evfc {

inline std::size_t reverse_bits(std::size_t x, int bit_count) noexcept {
  std::size_t r = 0;
  for (int i = 0; i < bit_count; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

class NttTables {
 public:
  NttTables(std::size_t degree, const Modulus& modulus) : degree_(degree), modulus_(modulus) {
    if (degree < 2 || !std::has_single_bit(degree)) {
      throw InvalidModulus("ring degree must be a power of two >= 2");
    }
    log_degree_ = std::countr_zero(degree);
    root_ = minimal_primitive_root(modulus_, 2 * degree);
    const std::uint64_t inv_root = modulus_.inverse(root_);

    root_powers_.resize(degree);
    inv_root_powers_.resize(degree);
    std::uint64_t power = 1;
    std::uint64_t inv_power = 1;
    std::vector<std::uint64_t> pw(degree), ipw(degree);
    for (std::size_t i = 0; i < degree; ++i) {
      pw[i] = power;
      ipw[i] = inv_power;
      power = modulus_.mul(power, root_);
      inv_power = modulus_.mul(inv_power, inv_root);
    }
    for (std::size_t i = 0; i < degree; ++i) {
      const std::size_t r = reverse_bits(i, log_degree_);
      root_powers_[i] = ShoupOperand(pw[r], modulus_);
      inv_root_powers_[i] = ShoupOperand(ipw[r], modulus_);
    }
    inv_degree_ = ShoupOperand(modulus_.inverse(degree), modulus_);
  }

  std::size_t degree() const noexcept { return degree_; }
  int log_degree() const noexcept { return log_degree_; }
  const Modulus& modulus() const noexcept { return modulus_; }
  /// The primitive 2N-th root of unity psi used by this table.
  std::uint64_t root() const noexcept { return root_; }

  /// Index of the transform slot holding the evaluation at psi^exponent
  /// (exponent odd, taken mod 2N).
  std::size_t slot_of_exponent(std::uint64_t exponent) const noexcept {
    exponent %= 2 * degree_;
    return reverse_bits(static_cast<std::size_t>((exponent - 1) / 2), log_degree_);
  }
  std::uint64_t exponent_of_slot(std::size_t index) const noexcept {
    return 2 * reverse_bits(index, log_degree_) + 1;
  }

  void forward(std::span<std::uint64_t> a) const noexcept {
    const std::uint64_t p = modulus_.value();
    std::size_t gap = degree_;
    for (std::size_t m = 1; m < degree_; m <<= 1) {
      gap >>= 1;
      for (std::size_t i = 0; i < m; ++i) {
        const ShoupOperand& w = root_powers_[m + i];
        std::uint64_t* x = a.data() + 2 * i * gap;
        std::uint64_t* y = x + gap;
        for (std::size_t j = 0; j < gap; ++j) {
          const std::uint64_t u = x[j];
          const std::uint64_t v = mul_shoup(y[j], w, p);
          x[j] = sub_if_geq(u + v, p);
          y[j] = sub_mod(u, v, p);
        }
      }
    }
  }

  void inverse(std::span<std::uint64_t> a) const noexcept {
    const std::uint64_t p = modulus_.value();
    std::size_t gap = 1;
    for (std::size_t m = degree_; m > 1; m >>= 1) {
      const std::size_t half = m >> 1;
      for (std::size_t i = 0; i < half; ++i) {
        const ShoupOperand& w = inv_root_powers_[half + i];
        std::uint64_t* x = a.data() + 2 * i * gap;
        std::uint64_t* y = x + gap;
        for (std::size_t j = 0; j < gap; ++j) {
          const std::uint64_t u = x[j];
          const std::uint64_t v = y[j];
          x[j] = sub_if_geq(u + v, p);
          y[j] = mul_shoup(sub_mod(u, v, p), w, p);
        }
      }
      gap <<= 1;
    }
    for (auto& v : a) v = mul_shoup(v, inv_degree_, p);
  }

 private:
  std::size_t degree_;
  int log_degree_ = 0;
  Modulus modulus_;
  std::uint64_t root_ = 0;
  std::vector<ShoupOperand> root_powers_;
  std::vector<ShoupOperand> inv_root_powers_;
  ShoupOperand inv_degree_;
};

}  // namespace evfc
