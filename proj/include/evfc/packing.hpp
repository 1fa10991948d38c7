#pragma once

// Slot packing between cleartext vectors in Z_t^M and plaintexts in R_t.
//
// A plaintext is identified with its evaluations at the 2N-th roots
// psi^(3^j) (row 0) and psi^(-3^j) (row 1), j = 0..M-1, M = N/2. Row 0 holds
// the M visible slots; row 1 is kept at zero by pack(). The automorphism
// X -> X^(3^r) rotates both rows left by r, so rotation on the visible row
// is an exact cyclic shift over M slots.
//
// Slot j of row 0 sits at NTT index bitrev((3^j mod 2N - 1) / 2) of the
// length-N negacyclic transform over Z_t (see NttTables for the layout).

#include <cstdint>
#include <span>
#include <vector>

#include "evfc/scheme.hpp"

namespace evfc {

/// Length-M vector of centered residues mod t.
class CleartextVector {
 public:
  CleartextVector() = default;
  CleartextVector(std::size_t slots, std::uint64_t t) : t_(t), slots_(slots, 0) {}
  CleartextVector(std::vector<std::int64_t> values, std::uint64_t t) : t_(t), slots_(std::move(values)) {
    for (auto v : slots_) check(v);
  }

  std::size_t size() const noexcept { return slots_.size(); }
  std::uint64_t modulus() const noexcept { return t_; }
  std::int64_t operator[](std::size_t i) const { return slots_.at(i); }
  void set(std::size_t i, std::int64_t v) {
    check(v);
    slots_.at(i) = v;
  }
  std::span<const std::int64_t> values() const noexcept { return slots_; }

  friend bool operator==(const CleartextVector& a, const CleartextVector& b) noexcept {
    return a.t_ == b.t_ && a.slots_ == b.slots_;
  }

 private:
  void check(std::int64_t v) const {
    const auto half = static_cast<std::int64_t>(t_ / 2);
    // [-t/2, t/2) for odd t is [-(t-1)/2, (t-1)/2]
    if (v < -half || v > half || (t_ % 2 == 0 && v == half)) {
      throw OutOfRange("slot value " + std::to_string(v) + " outside centered range mod t");
    }
  }

  std::uint64_t t_ = 0;
  std::vector<std::int64_t> slots_;
};

class BatchEncoder {
 public:
  explicit BatchEncoder(ParamsPtr params) : params_(std::move(params)) {
    const std::size_t n = params_->degree();
    const std::size_t m = params_->slot_count();
    const NttTables& tables = params_->t_basis()->ntt(0);
    const Modulus two_n(2 * n);
    row0_.resize(m);
    row1_.resize(m);
    std::uint64_t g = 1;
    for (std::size_t j = 0; j < m; ++j) {
      row0_[j] = tables.slot_of_exponent(g);
      row1_[j] = tables.slot_of_exponent(2 * n - g);
      g = two_n.mul(g, 3);
    }
  }

  std::size_t slot_count() const noexcept { return params_->slot_count(); }
  const ParamsPtr& params() const noexcept { return params_; }

  CleartextVector zeros() const { return CleartextVector(slot_count(), params_->t()); }

  /// Convenience: builds a cleartext from the leading values, rest zero.
  CleartextVector make_vector(std::span<const std::int64_t> leading) const {
    if (leading.size() > slot_count()) throw OutOfRange("more values than slots");
    CleartextVector v = zeros();
    const Modulus& t = params_->plain_modulus();
    for (std::size_t i = 0; i < leading.size(); ++i) v.set(i, t.centered(t.from_signed(leading[i])));
    return v;
  }

  Plaintext pack(const CleartextVector& x) const {
    if (x.size() != slot_count() || x.modulus() != params_->t()) {
      throw ParameterMismatch("cleartext must have M slots under the scheme's t");
    }
    const Modulus& t = params_->plain_modulus();
    RingPoly p(params_->t_basis(), PolyForm::ntt);
    auto evals = p.residue(0);
    for (std::size_t j = 0; j < x.size(); ++j) evals[row0_[j]] = t.from_signed(x[j]);
    ntt_inplace(p, NttDirection::inverse);
    return Plaintext(std::move(p));
  }

  CleartextVector unpack(const Plaintext& m) const {
    if (!same_basis(params_->t_basis(), m.poly().basis())) throw ParameterMismatch("plaintext belongs to other parameters");
    const RingPoly evals = ntt_transform(m.poly(), NttDirection::forward);
    const Modulus& t = params_->plain_modulus();
    CleartextVector x = zeros();
    auto row = evals.residue(0);
    for (std::size_t j = 0; j < x.size(); ++j) x.set(j, t.centered(row[row0_[j]]));
    return x;
  }

  /// Values in the second (hidden) slot row; zero for anything pack() made.
  std::vector<std::int64_t> hidden_row(const Plaintext& m) const {
    const RingPoly evals = ntt_transform(m.poly(), NttDirection::forward);
    const Modulus& t = params_->plain_modulus();
    std::vector<std::int64_t> out(slot_count());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = t.centered(evals.residue(0)[row1_[j]]);
    return out;
  }

 private:
  ParamsPtr params_;
  std::vector<std::size_t> row0_;
  std::vector<std::size_t> row1_;
};

}  // namespace evfc
