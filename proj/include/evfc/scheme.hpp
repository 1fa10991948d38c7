#pragma once

// Exact-integer RLWE scheme (BFV style) over the RNS ring R_Q:
// Enc, Dec, homomorphic add, plaintext and ciphertext multiplication,
// slot rotation, and invariant-noise budget measurement.

#include <atomic>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "evfc/keys.hpp"

namespace evfc {

/// Element of R_t, held in coefficient form with residues in [0, t).
class Plaintext {
 public:
  Plaintext() = default;
  explicit Plaintext(RingPoly poly) : poly_(std::move(poly)) {
    if (poly_.residue_count() != 1 || poly_.form() != PolyForm::coefficient) {
      throw ParameterMismatch("plaintext must be a single-residue coefficient polynomial");
    }
  }
  /// Plaintext from signed coefficients (reduced mod t).
  static Plaintext from_coefficients(const SchemeParams& params, std::span<const std::int64_t> coeffs) {
    return Plaintext(RingPoly::from_signed(params.t_basis(), coeffs));
  }
  /// Degree-zero plaintext holding one constant.
  static Plaintext constant(const SchemeParams& params, std::int64_t value) {
    std::vector<std::int64_t> c(params.degree(), 0);
    c[0] = value;
    return from_coefficients(params, c);
  }

  const RingPoly& poly() const noexcept { return poly_; }
  std::size_t degree() const noexcept { return poly_.degree(); }
  std::int64_t coeff(std::size_t k) const { return poly_.centered(0, k); }
  std::vector<std::int64_t> coefficients() const {
    std::vector<std::int64_t> out(degree());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = coeff(k);
    return out;
  }

  friend bool operator==(const Plaintext& a, const Plaintext& b) noexcept { return a.poly_ == b.poly_; }

 private:
  RingPoly poly_;
};

/// Ciphertext (c0, c1) over R_Q in NTT form, decrypting via c0 + c1*s.
struct Ciphertext {
  std::vector<RingPoly> parts;

  std::size_t size() const noexcept { return parts.size(); }
  friend bool operator==(const Ciphertext& a, const Ciphertext& b) noexcept { return a.parts == b.parts; }
};

struct NoiseReport {
  double budget_bits = 0.0;
};

namespace detail {

inline void require_params(const SchemeParams& params, const RingPoly& p) {
  if (!same_basis(params.q_basis(), p.basis())) throw ParameterMismatch("ciphertext belongs to other parameters");
}

/// round(Q * m / t) for each coefficient, as a coefficient-form poly over Q.
inline RingPoly scale_plaintext(const SchemeParams& params, const Plaintext& m) {
  const auto& basis = params.q_basis();
  RingPoly out(basis, PolyForm::coefficient);
  const std::size_t n = params.degree();
  const auto t = static_cast<i128>(params.t());
  const auto r = static_cast<i128>(params.q_mod_t());
  const auto& delta = params.delta_residues();
  for (std::size_t k = 0; k < n; ++k) {
    const std::int64_t mk = m.coeff(k);
    // round(r*m/t) = floor((2*r*m + t) / (2t))
    const i128 num = 2 * r * mk + t;
    i128 frac = num / (2 * t);
    if (num % (2 * t) != 0 && num < 0) --frac;
    const auto frac64 = static_cast<std::int64_t>(frac);
    for (std::size_t i = 0; i < basis->size(); ++i) {
      const Modulus& qi = basis->modulus(i);
      out.residue(i)[k] = qi.add(qi.mul(delta[i], qi.from_signed(mk)), qi.from_signed(frac64));
    }
  }
  return out;
}

/// Lifts a plaintext's centered coefficients into R_Q, NTT form.
inline RingPoly lift_plaintext_ntt(const SchemeParams& params, const Plaintext& k) {
  RingPoly out(params.q_basis(), PolyForm::coefficient);
  const Modulus& t = params.plain_modulus();
  auto src = k.poly().residue(0);
  for (std::size_t i = 0; i < out.residue_count(); ++i) {
    const Modulus& qi = params.q_basis()->modulus(i);
    auto row = out.residue(i);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = qi.from_signed(t.centered(src[c]));
  }
  to_ntt(out);
  return out;
}

/// Coefficient-form c0 + c1*s (+ c2*s^2 for three-part ciphertexts).
inline RingPoly dot_with_secret(const SchemeParams& params, const SecretKey& sk, const Ciphertext& c) {
  if (c.size() < 2) throw ParameterMismatch("ciphertext needs at least two parts");
  for (const auto& p : c.parts) require_params(params, p);
  RingPoly acc = c.parts[0];
  RingPoly s_power = sk.s;
  for (std::size_t j = 1; j < c.size(); ++j) {
    RingPoly term = c.parts[j];
    mul_pointwise_inplace(term, s_power);
    add_inplace(acc, term);
    if (j + 1 < c.size()) mul_pointwise_inplace(s_power, sk.s);
  }
  to_coefficients(acc);
  return acc;
}

struct Decryption {
  Plaintext message;
  NoiseReport noise;
};

/// Decrypts and measures the invariant noise: with x = [c0 + c1*s]_Q,
/// m = round(t*x/Q) and the residual [t*x]_Q = t*x - Q*m is Q times the
/// invariant noise. Budget = bits(Q) - bits(max residual) - 1.
inline Decryption decrypt_and_measure(const SchemeParams& params, const SecretKey& sk, const Ciphertext& c) {
  const RingPoly x = dot_with_secret(params, sk, c);
  const auto& basis = params.q_basis();
  const std::size_t n = params.degree();
  const mpz_class& q = basis->product();
  const mpz_class two_q = 2 * q;
  const std::uint64_t t = params.t();

  std::vector<std::int64_t> coeffs(n);
  mpz_class value, scaled, rounded, residual, max_residual = 0;
  for (std::size_t k = 0; k < n; ++k) {
    basis->compose_centered(x.data().data() + k, n, value);
    mpz_mul_ui(scaled.get_mpz_t(), value.get_mpz_t(), t);
    // rounded = floor((2*t*x + Q) / 2Q)
    rounded = 2 * scaled + q;
    mpz_fdiv_q(rounded.get_mpz_t(), rounded.get_mpz_t(), two_q.get_mpz_t());
    residual = scaled - rounded * q;
    if (mpz_cmpabs(residual.get_mpz_t(), max_residual.get_mpz_t()) > 0) max_residual = abs(residual);
    coeffs[k] = static_cast<std::int64_t>(mpz_fdiv_ui(rounded.get_mpz_t(), t));
  }
  Decryption out{Plaintext::from_coefficients(params, coeffs), {}};
  const auto q_bits = static_cast<long>(mpz_sizeinbase(q.get_mpz_t(), 2));
  const long noise_bits = sgn(max_residual) == 0 ? 0 : static_cast<long>(mpz_sizeinbase(max_residual.get_mpz_t(), 2));
  out.noise.budget_bits = static_cast<double>(std::max(0L, q_bits - noise_bits - 1));
  return out;
}

}  // namespace detail

/// Enc(pk, m) = (round(Q m / t) + p0*u + e1, p1*u + e2), u ternary, e Gaussian.
inline Ciphertext encrypt(const SchemeParams& params, const PublicKey& pk, const Plaintext& m, Rng& rng) {
  if (!same_basis(params.t_basis(), m.poly().basis())) throw ParameterMismatch("plaintext belongs to other parameters");
  const auto& basis = params.q_basis();
  const std::size_t n = params.degree();
  RingPoly u = detail::small_poly_ntt(basis, sample_ternary(n, rng));

  RingPoly c0 = detail::scale_plaintext(params, m);
  add_inplace(c0, RingPoly::from_signed(basis, sample_gaussian(n, params.err_stddev(), rng)));
  to_ntt(c0);
  RingPoly p0u = pk.p0;
  mul_pointwise_inplace(p0u, u);
  add_inplace(c0, p0u);

  RingPoly c1 = detail::small_poly_ntt(basis, sample_gaussian(n, params.err_stddev(), rng));
  RingPoly p1u = pk.p1;
  mul_pointwise_inplace(p1u, u);
  add_inplace(c1, p1u);

  Ciphertext c;
  c.parts.push_back(std::move(c0));
  c.parts.push_back(std::move(c1));
  return c;
}

/// Public-key encryptor bound to one parameter set; counts calls.
class Encryptor {
 public:
  Encryptor(ParamsPtr params, PublicKey pk) : params_(std::move(params)), pk_(std::move(pk)) {}

  Ciphertext encrypt(const Plaintext& m, Rng& rng) const {
    ++count_;
    return evfc::encrypt(*params_, pk_, m, rng);
  }
  std::size_t count() const noexcept { return count_.load(); }
  void reset_count() noexcept { count_ = 0; }
  const ParamsPtr& params() const noexcept { return params_; }

 private:
  ParamsPtr params_;
  PublicKey pk_;
  mutable std::atomic<std::size_t> count_{0};
};

/// Dec. Throws NoiseOverflow when the noise budget is exhausted, since the
/// result is then unreliable; pass check_noise = false to get it anyway.
inline Plaintext decrypt(const SchemeParams& params, const SecretKey& sk, const Ciphertext& c,
                         bool check_noise = true) {
  auto d = detail::decrypt_and_measure(params, sk, c);
  if (check_noise && d.noise.budget_bits <= 0.0) throw NoiseOverflow("noise budget exhausted; decryption unreliable");
  return std::move(d.message);
}

/// Remaining noise headroom in bits (needs the secret key; diagnostics only).
inline NoiseReport noise_budget(const SchemeParams& params, const SecretKey& sk, const Ciphertext& c) {
  return detail::decrypt_and_measure(params, sk, c).noise;
}

struct OpCounts {
  std::size_t add = 0;
  std::size_t pmult = 0;
  std::size_t cmult = 0;
  std::size_t rotate = 0;
  std::size_t key_switch = 0;
};

class Evaluator {
 public:
  explicit Evaluator(ParamsPtr params) : params_(std::move(params)) {}

  const ParamsPtr& params() const noexcept { return params_; }

  // c1 (+) c2
  Ciphertext add(const Ciphertext& a, const Ciphertext& b) const {
    Ciphertext out = a;
    add_inplace(out, b);
    return out;
  }

  void add_inplace(Ciphertext& a, const Ciphertext& b) const {
    if (a.size() != b.size()) throw ParameterMismatch("ciphertext sizes differ");
    for (std::size_t j = 0; j < a.size(); ++j) {
      detail::require_params(*params_, a.parts[j]);
      evfc::add_inplace(a.parts[j], b.parts[j]);
    }
    ++counts_.add;
  }

  // k . c for a plaintext k in R_t
  Ciphertext pmult(const Plaintext& k, const Ciphertext& c) const {
    if (!same_basis(params_->t_basis(), k.poly().basis())) throw ParameterMismatch("plaintext belongs to other parameters");
    const RingPoly lifted = detail::lift_plaintext_ntt(*params_, k);
    Ciphertext out = c;
    for (auto& part : out.parts) {
      detail::require_params(*params_, part);
      mul_pointwise_inplace(part, lifted);
    }
    ++counts_.pmult;
    return out;
  }

  // c1 (x) c2, relinearized back to two parts
  Ciphertext cmult(const Ciphertext& a, const Ciphertext& b, const RelinKey& rlk) const {
    if (a.size() != 2 || b.size() != 2) throw ParameterMismatch("cmult needs two-part ciphertexts");
    for (const auto* c : {&a, &b}) {
      for (const auto& p : c->parts) detail::require_params(*params_, p);
    }
    auto ext = [this](const RingPoly& p) { return extend_to_qp(p); };
    const RingPoly a0 = ext(a.parts[0]), a1 = ext(a.parts[1]);
    const RingPoly b0 = ext(b.parts[0]), b1 = ext(b.parts[1]);

    RingPoly d0 = a0;
    mul_pointwise_inplace(d0, b0);
    RingPoly d1 = a0;
    mul_pointwise_inplace(d1, b1);
    RingPoly cross = a1;
    mul_pointwise_inplace(cross, b0);
    evfc::add_inplace(d1, cross);
    RingPoly d2 = a1;
    mul_pointwise_inplace(d2, b1);

    Ciphertext out;
    out.parts.push_back(scale_down(std::move(d0)));
    out.parts.push_back(scale_down(std::move(d1)));
    const RingPoly e2 = scale_down(std::move(d2));
    auto [k0, k1] = key_switch(e2, rlk.key);
    evfc::add_inplace(out.parts[0], k0);
    evfc::add_inplace(out.parts[1], k1);
    ++counts_.cmult;
    return out;
  }

  /// Rotates slots left by `step`. Uses the key for `step` when present,
  /// otherwise composes power-of-two keys from its binary expansion.
  Ciphertext rotate(const Ciphertext& c, std::size_t step, const GaloisKeys& keys) const {
    ++counts_.rotate;
    step %= params_->slot_count();
    if (step == 0) return c;
    if (keys.has(step)) return apply_galois(c, keys.by_step.at(step));
    std::vector<const GaloisKey*> chain;
    for (std::size_t bit = 1; bit <= step; bit <<= 1) {
      if ((step & bit) == 0) continue;
      if (!keys.has(bit)) throw MissingGaloisKey("no Galois key for rotation step " + std::to_string(bit));
      chain.push_back(&keys.by_step.at(bit));
    }
    Ciphertext out = c;
    for (const auto* gk : chain) out = apply_galois(out, *gk);
    return out;
  }

  OpCounts counts() const noexcept {
    return {counts_.add.load(), counts_.pmult.load(), counts_.cmult.load(), counts_.rotate.load(),
            counts_.key_switch.load()};
  }
  void reset_counts() const noexcept {
    counts_.add = 0;
    counts_.pmult = 0;
    counts_.cmult = 0;
    counts_.rotate = 0;
    counts_.key_switch = 0;
  }

  /// Returns (k0, k1), NTT form over Q, with k0 + k1*s = d*s' + small noise
  /// for the secret s' the key was generated for.
  std::pair<RingPoly, RingPoly> key_switch(const RingPoly& d_ntt, const KeySwitchKey& key) const {
    ++counts_.key_switch;
    const auto& basis = params_->q_basis();
    const std::size_t levels = basis->size();
    const std::size_t n = params_->degree();
    if (key.b.size() != levels) throw ParameterMismatch("key-switching key has wrong digit count");

    RingPoly coeff = d_ntt;
    to_coefficients(coeff);
    RingPoly k0(basis, PolyForm::ntt), k1(basis, PolyForm::ntt);
    // digits[i] = [d]_{q_i} lifted to q_j, NTT form; row j is d itself
    std::vector<std::uint64_t> digits(levels * n);
    std::vector<const std::uint64_t*> src(levels), kb(levels), ka(levels);
    for (std::size_t j = 0; j < levels; ++j) {
      const Modulus& qj = basis->modulus(j);
      for (std::size_t i = 0; i < levels; ++i) {
        kb[i] = key.b[i].residue(j).data();
        ka[i] = key.a[i].residue(j).data();
        if (i == j) {
          src[i] = d_ntt.residue(j).data();
          continue;
        }
        const Modulus& qi = basis->modulus(i);
        auto row = coeff.residue(i);
        std::span<std::uint64_t> digit(digits.data() + i * n, n);
        for (std::size_t k = 0; k < n; ++k) digit[k] = qj.from_signed(qi.centered(row[k]));
        basis->ntt(j).forward(digit);
        src[i] = digit.data();
      }
      auto r0 = k0.residue(j);
      auto r1 = k1.residue(j);
      for (std::size_t k = 0; k < n; ++k) {
        u128 acc0 = 0, acc1 = 0;
        for (std::size_t i = 0; i < levels; ++i) {
          acc0 += static_cast<u128>(src[i][k]) * kb[i][k];
          acc1 += static_cast<u128>(src[i][k]) * ka[i][k];
          // products are < 2^122; fold before 32 of them can overflow
          if ((i & 31) == 31) {
            acc0 = qj.reduce128(acc0);
            acc1 = qj.reduce128(acc1);
          }
        }
        r0[k] = qj.reduce128(acc0);
        r1[k] = qj.reduce128(acc1);
      }
    }
    return {std::move(k0), std::move(k1)};
  }

 private:
  Ciphertext apply_galois(const Ciphertext& c, const GaloisKey& gk) const {
    if (c.size() != 2) throw ParameterMismatch("rotation needs a two-part ciphertext");
    for (const auto& p : c.parts) detail::require_params(*params_, p);
    RingPoly c0 = apply_galois_ntt(c.parts[0], gk.permutation);
    const RingPoly c1 = apply_galois_ntt(c.parts[1], gk.permutation);
    auto [k0, k1] = key_switch(c1, gk.key);
    evfc::add_inplace(c0, k0);
    Ciphertext out;
    out.parts.push_back(std::move(c0));
    out.parts.push_back(std::move(k1));
    return out;
  }

  /// Exact lift of a centered R_Q element into the Q*P basis, NTT form.
  /// Uses x = sum_i y_i (Q/q_i) - v Q, y_i = [x_i (Q/q_i)^-1]_{q_i},
  /// v = round(sum_i y_i / q_i).
  RingPoly extend_to_qp(const RingPoly& p_ntt) const {
    const auto& qb = params_->q_basis();
    const auto& qpb = params_->qp_basis();
    const std::size_t levels = qb->size();
    const std::size_t aux = params_->aux_count();
    const std::size_t n = params_->degree();
    const auto& punctured = params_->punctured_mod_aux();
    const auto& q_mod = params_->q_mod_aux();

    RingPoly coeff = p_ntt;
    to_coefficients(coeff);
    RingPoly out(qpb, PolyForm::ntt);
    for (std::size_t i = 0; i < levels; ++i) {
      std::copy(p_ntt.residue(i).begin(), p_ntt.residue(i).end(), out.residue(i).begin());
    }
    std::vector<std::uint64_t> y(levels);
    for (std::size_t k = 0; k < n; ++k) {
      long double frac = 0.0L;
      for (std::size_t i = 0; i < levels; ++i) {
        const Modulus& qi = qb->modulus(i);
        y[i] = mul_shoup(coeff.residue(i)[k], qb->punctured_inverse(i), qi.value());
        frac += static_cast<long double>(y[i]) / static_cast<long double>(qi.value());
      }
      const auto v = static_cast<std::uint64_t>(frac + 0.5L);
      for (std::size_t j = 0; j < aux; ++j) {
        const Modulus& pj = qpb->modulus(levels + j);
        u128 sum = 0;
        for (std::size_t i = 0; i < levels; ++i) sum += static_cast<u128>(y[i]) * punctured[i * aux + j];
        out.residue(levels + j)[k] = pj.sub(pj.reduce128(sum), pj.mul(pj.reduce(v), q_mod[j]));
      }
    }
    for (std::size_t j = 0; j < aux; ++j) qpb->ntt(levels + j).forward(out.residue(levels + j));
    return out;
  }

  /// round(t * x / Q) for a Q*P-basis NTT-form product x; result over Q, NTT form.
  RingPoly scale_down(RingPoly x) const {
    const auto& qb = params_->q_basis();
    const auto& qpb = params_->qp_basis();
    const std::size_t n = params_->degree();
    to_coefficients(x);
    const mpz_class& q = qb->product();
    const mpz_class two_q = 2 * q;
    RingPoly out(qb, PolyForm::coefficient);
    mpz_class value, num;
    for (std::size_t k = 0; k < n; ++k) {
      qpb->compose_centered(x.data().data() + k, n, value);
      mpz_mul_ui(num.get_mpz_t(), value.get_mpz_t(), params_->t());
      num = 2 * num + q;
      mpz_fdiv_q(num.get_mpz_t(), num.get_mpz_t(), two_q.get_mpz_t());
      qb->decompose(num, out.data().data() + k, n);
    }
    to_ntt(out);
    return out;
  }

  struct AtomicCounts {
    std::atomic<std::size_t> add{0}, pmult{0}, cmult{0}, rotate{0}, key_switch{0};
  };

  ParamsPtr params_;
  mutable AtomicCounts counts_;
};

}  // namespace evfc
