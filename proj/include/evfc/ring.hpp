#pragma once

// Polynomials in Z_Q[X]/(X^N + 1) held in residue number system form:
// one length-N residue row per prime of an RnsBasis.

#include <gmpxx.h>

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "evfc/modarith.hpp"
#include "evfc/ntt.hpp"

namespace evfc {

enum class PolyForm : std::uint8_t { coefficient = 0, ntt = 1 };
enum class NttDirection { forward, inverse };

/// An ordered set of distinct NTT-friendly primes sharing one ring degree,
/// together with transform tables and CRT reconstruction constants.
class RnsBasis {
 public:
  RnsBasis(std::size_t degree, const std::vector<std::uint64_t>& primes) : degree_(degree) {
    if (primes.empty()) throw InvalidModulus("RNS basis needs at least one prime");
    for (std::size_t i = 0; i < primes.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (primes[i] == primes[j]) throw InvalidModulus("RNS primes must be distinct");
      }
      if (!is_prime(primes[i])) throw InvalidModulus(std::to_string(primes[i]) + " is not prime");
      moduli_.emplace_back(primes[i]);
      tables_.emplace_back(degree, moduli_.back());
    }
    product_ = 1;
    for (const auto& m : moduli_) product_ *= mpz_class(std::to_string(m.value()));
    half_product_ = product_ / 2;
    for (const auto& m : moduli_) {
      mpz_class punctured = product_ / mpz_class(std::to_string(m.value()));
      const auto punctured_mod = static_cast<std::uint64_t>(
          mpz_class(punctured % mpz_class(std::to_string(m.value()))).get_ui());
      punctured_inverse_.emplace_back(m.inverse(punctured_mod), m);
      punctured_.push_back(std::move(punctured));
    }
  }

  std::size_t degree() const noexcept { return degree_; }
  std::size_t size() const noexcept { return moduli_.size(); }
  const Modulus& modulus(std::size_t i) const { return moduli_.at(i); }
  const std::vector<Modulus>& moduli() const noexcept { return moduli_; }
  const NttTables& ntt(std::size_t i) const { return tables_.at(i); }
  const mpz_class& product() const noexcept { return product_; }
  /// [(Q / q_i)^-1]_{q_i} as a Shoup operand.
  const ShoupOperand& punctured_inverse(std::size_t i) const { return punctured_inverse_.at(i); }
  int total_bit_count() const noexcept {
    int bits = 0;
    for (const auto& m : moduli_) bits += m.bit_count();
    return bits;
  }

  /// CRT-reconstructs the centered integer in [-Q/2, Q/2) whose residues
  /// are residues[i * stride].
  void compose_centered(const std::uint64_t* residues, std::size_t stride, mpz_class& out) const {
    out = 0;
    long double estimate = 0.0L;
    for (std::size_t i = 0; i < moduli_.size(); ++i) {
      const std::uint64_t y = mul_shoup(residues[i * stride], punctured_inverse_[i], moduli_[i].value());
      mpz_addmul_ui(out.get_mpz_t(), punctured_[i].get_mpz_t(), y);
      estimate += static_cast<long double>(y) / static_cast<long double>(moduli_[i].value());
    }
    // out = x + v*Q with v ~ floor(estimate); fix up exactly afterwards.
    const auto v = static_cast<unsigned long>(estimate);
    if (v > 0) mpz_submul_ui(out.get_mpz_t(), product_.get_mpz_t(), v);
    while (sgn(out) < 0) out += product_;
    while (out >= product_) out -= product_;
    if (out >= half_product_ && (out > half_product_ || mpz_even_p(product_.get_mpz_t()))) {
      out -= product_;
    }
  }

  /// Writes x mod q_i to residues[i * stride] for every prime.
  void decompose(const mpz_class& x, std::uint64_t* residues, std::size_t stride) const {
    for (std::size_t i = 0; i < moduli_.size(); ++i) {
      residues[i * stride] = mpz_fdiv_ui(x.get_mpz_t(), moduli_[i].value());
    }
  }

  friend bool operator==(const RnsBasis& a, const RnsBasis& b) noexcept {
    return a.degree_ == b.degree_ && a.moduli_ == b.moduli_;
  }

 private:
  std::size_t degree_;
  std::vector<Modulus> moduli_;
  std::vector<NttTables> tables_;
  mpz_class product_;
  mpz_class half_product_;
  std::vector<mpz_class> punctured_;
  std::vector<ShoupOperand> punctured_inverse_;
};

using BasisPtr = std::shared_ptr<const RnsBasis>;

inline bool same_basis(const BasisPtr& a, const BasisPtr& b) noexcept {
  return a == b || (a && b && *a == *b);
}

/// Element of R_Q = Z_Q[X]/(X^N + 1). Residue row i lives at
/// data()[i * N, (i + 1) * N) and holds values in [0, q_i).
class RingPoly {
 public:
  RingPoly() = default;
  RingPoly(BasisPtr basis, PolyForm form)
      : basis_(std::move(basis)), form_(form), data_(basis_->size() * basis_->degree(), 0) {}

  /// Builds a polynomial from signed coefficients, reduced into every residue.
  static RingPoly from_signed(BasisPtr basis, std::span<const std::int64_t> coeffs) {
    if (coeffs.size() != basis->degree()) throw ParameterMismatch("coefficient count must equal ring degree");
    RingPoly p(std::move(basis), PolyForm::coefficient);
    const std::size_t n = p.degree();
    for (std::size_t i = 0; i < p.residue_count(); ++i) {
      const Modulus& m = p.basis_->modulus(i);
      auto row = p.residue(i);
      for (std::size_t k = 0; k < n; ++k) row[k] = m.from_signed(coeffs[k]);
    }
    return p;
  }

  const BasisPtr& basis() const noexcept { return basis_; }
  PolyForm form() const noexcept { return form_; }
  void set_form(PolyForm f) noexcept { form_ = f; }
  std::size_t degree() const noexcept { return basis_ ? basis_->degree() : 0; }
  std::size_t residue_count() const noexcept { return basis_ ? basis_->size() : 0; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<std::uint64_t> residue(std::size_t i) noexcept {
    return {data_.data() + i * degree(), degree()};
  }
  std::span<const std::uint64_t> residue(std::size_t i) const noexcept {
    return {data_.data() + i * degree(), degree()};
  }
  std::span<std::uint64_t> data() noexcept { return data_; }
  std::span<const std::uint64_t> data() const noexcept { return data_; }

  /// Centered value of coefficient k in residue row i.
  std::int64_t centered(std::size_t i, std::size_t k) const {
    return basis_->modulus(i).centered(data_[i * degree() + k]);
  }

  friend bool operator==(const RingPoly& a, const RingPoly& b) noexcept {
    return same_basis(a.basis_, b.basis_) && a.form_ == b.form_ && a.data_ == b.data_;
  }

 private:
  BasisPtr basis_;
  PolyForm form_ = PolyForm::coefficient;
  std::vector<std::uint64_t> data_;
};

inline void require_compatible(const RingPoly& a, const RingPoly& b) {
  if (!same_basis(a.basis(), b.basis())) throw ParameterMismatch("polynomials live under different moduli");
  if (a.form() != b.form()) throw ParameterMismatch("polynomials are in different representations");
}

inline void ntt_inplace(RingPoly& a, NttDirection direction) {
  const PolyForm expected = direction == NttDirection::forward ? PolyForm::coefficient : PolyForm::ntt;
  if (a.form() != expected) {
    throw ParameterMismatch(direction == NttDirection::forward ? "forward NTT needs coefficient form"
                                                               : "inverse NTT needs NTT form");
  }
  for (std::size_t i = 0; i < a.residue_count(); ++i) {
    if (direction == NttDirection::forward) {
      a.basis()->ntt(i).forward(a.residue(i));
    } else {
      a.basis()->ntt(i).inverse(a.residue(i));
    }
  }
  a.set_form(direction == NttDirection::forward ? PolyForm::ntt : PolyForm::coefficient);
}

inline RingPoly ntt_transform(RingPoly a, NttDirection direction) {
  ntt_inplace(a, direction);
  return a;
}

inline void to_ntt(RingPoly& a) {
  if (a.form() == PolyForm::coefficient) ntt_inplace(a, NttDirection::forward);
}
inline void to_coefficients(RingPoly& a) {
  if (a.form() == PolyForm::ntt) ntt_inplace(a, NttDirection::inverse);
}

inline void add_inplace(RingPoly& a, const RingPoly& b) {
  require_compatible(a, b);
  const std::size_t n = a.degree();
  for (std::size_t i = 0; i < a.residue_count(); ++i) {
    const Modulus& m = a.basis()->modulus(i);
    auto x = a.residue(i);
    auto y = b.residue(i);
    for (std::size_t k = 0; k < n; ++k) x[k] = m.add(x[k], y[k]);
  }
}

inline void sub_inplace(RingPoly& a, const RingPoly& b) {
  require_compatible(a, b);
  const std::size_t n = a.degree();
  for (std::size_t i = 0; i < a.residue_count(); ++i) {
    const Modulus& m = a.basis()->modulus(i);
    auto x = a.residue(i);
    auto y = b.residue(i);
    for (std::size_t k = 0; k < n; ++k) x[k] = m.sub(x[k], y[k]);
  }
}

inline void negate_inplace(RingPoly& a) {
  for (std::size_t i = 0; i < a.residue_count(); ++i) {
    const Modulus& m = a.basis()->modulus(i);
    for (auto& v : a.residue(i)) v = m.negate(v);
  }
}

/// Pointwise product; both operands must be in NTT form.
inline void mul_pointwise_inplace(RingPoly& a, const RingPoly& b) {
  require_compatible(a, b);
  if (a.form() != PolyForm::ntt) throw ParameterMismatch("pointwise product needs NTT form");
  const std::size_t n = a.degree();
  for (std::size_t i = 0; i < a.residue_count(); ++i) {
    const Modulus& m = a.basis()->modulus(i);
    auto x = a.residue(i);
    auto y = b.residue(i);
    for (std::size_t k = 0; k < n; ++k) x[k] = m.mul(x[k], y[k]);
  }
}

inline RingPoly add(RingPoly a, const RingPoly& b) {
  add_inplace(a, b);
  return a;
}
inline RingPoly sub(RingPoly a, const RingPoly& b) {
  sub_inplace(a, b);
  return a;
}
inline RingPoly negate(RingPoly a) {
  negate_inplace(a);
  return a;
}

/// Product in R_Q (X^N = -1). Accepts either form; the result comes back in
/// coefficient form when both inputs were, otherwise in NTT form.
inline RingPoly poly_mul_mod(const RingPoly& a, const RingPoly& b) {
  if (!same_basis(a.basis(), b.basis())) throw ParameterMismatch("polynomials live under different moduli");
  const bool both_coefficient = a.form() == PolyForm::coefficient && b.form() == PolyForm::coefficient;
  RingPoly x = a;
  to_ntt(x);
  if (b.form() == PolyForm::ntt) {
    mul_pointwise_inplace(x, b);
  } else {
    RingPoly y = b;
    to_ntt(y);
    mul_pointwise_inplace(x, y);
  }
  if (both_coefficient) to_coefficients(x);
  return x;
}

/// Multiplies by a small signed scalar in every residue.
inline void mul_scalar_inplace(RingPoly& a, std::int64_t scalar) {
  for (std::size_t i = 0; i < a.residue_count(); ++i) {
    const Modulus& m = a.basis()->modulus(i);
    const ShoupOperand s(m.from_signed(scalar), m);
    for (auto& v : a.residue(i)) v = mul_shoup(v, s, m.value());
  }
}

}  // namespace evfc
