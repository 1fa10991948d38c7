#pragma once

// Key material and key generation.
//
// Key switching uses one digit per RNS prime: the key for target secret s'
// holds, for every prime q_i, an encryption of s' placed in residue i only
// (the CRT idempotent for q_i), so that sum_i [d]_{q_i} * key_i switches d*s'
// to d*s with noise sum_i [d]_{q_i} * e_i.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "evfc/params.hpp"
#include "evfc/sampling.hpp"

namespace evfc {

struct SecretKey {
  RingPoly s;  // NTT form over Q
  std::vector<std::int64_t> coeffs;
};

struct PublicKey {
  RingPoly p0;  // -(a*s + e), NTT form
  RingPoly p1;  // a, NTT form
};

struct KeySwitchKey {
  std::vector<RingPoly> b;  // b_i = -a_i*s + e_i + s' restricted to residue i
  std::vector<RingPoly> a;
};

struct RelinKey {
  KeySwitchKey key;
};

/// Galois element 3^step mod 2N: rotates both slot rows left by `step`.
inline std::uint64_t galois_element(std::size_t step, std::size_t degree) {
  const Modulus two_n(2 * degree);
  return two_n.pow(3, step);
}

/// Permutation of NTT slots implementing X -> X^g: out[k] = in[perm[k]].
inline std::vector<std::uint32_t> galois_permutation(const NttTables& tables, std::uint64_t g) {
  const std::size_t n = tables.degree();
  std::vector<std::uint32_t> perm(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint64_t e = tables.exponent_of_slot(k) * g % (2 * n);
    perm[k] = static_cast<std::uint32_t>(tables.slot_of_exponent(e));
  }
  return perm;
}

inline RingPoly apply_galois_ntt(const RingPoly& a, const std::vector<std::uint32_t>& perm) {
  if (a.form() != PolyForm::ntt) throw ParameterMismatch("Galois permutation needs NTT form");
  RingPoly out(a.basis(), PolyForm::ntt);
  for (std::size_t i = 0; i < a.residue_count(); ++i) {
    auto src = a.residue(i);
    auto dst = out.residue(i);
    for (std::size_t k = 0; k < perm.size(); ++k) dst[k] = src[perm[k]];
  }
  return out;
}

struct GaloisKey {
  std::uint64_t element = 0;
  std::vector<std::uint32_t> permutation;
  KeySwitchKey key;
};

struct GaloisKeys {
  std::map<std::size_t, GaloisKey> by_step;

  bool has(std::size_t step) const { return by_step.count(step) != 0; }
  std::size_t size() const noexcept { return by_step.size(); }
};

/// What the server holds: enough to evaluate, nothing to decrypt.
struct EvaluationKeys {
  RelinKey relin;
  GaloisKeys galois;
};

struct KeySet {
  PublicKey pk;
  SecretKey sk;
  RelinKey rlk;
  GaloisKeys galois;

  EvaluationKeys evaluation_keys() const { return {rlk, galois}; }
};

namespace detail {

inline RingPoly small_poly_ntt(const BasisPtr& basis, const std::vector<std::int64_t>& coeffs) {
  RingPoly p = RingPoly::from_signed(basis, coeffs);
  to_ntt(p);
  return p;
}

inline KeySwitchKey make_switch_key(const SchemeParams& params, const RingPoly& target, const SecretKey& sk,
                                    Rng& rng) {
  const auto& basis = params.q_basis();
  KeySwitchKey key;
  for (std::size_t i = 0; i < basis->size(); ++i) {
    RingPoly a = sample_uniform_ntt(basis, rng);
    RingPoly e = small_poly_ntt(basis, sample_gaussian(params.degree(), params.err_stddev(), rng));
    RingPoly as = a;
    mul_pointwise_inplace(as, sk.s);
    RingPoly b = sub(std::move(e), as);
    const Modulus& qi = basis->modulus(i);
    auto row = b.residue(i);
    auto src = target.residue(i);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = qi.add(row[k], src[k]);
    key.b.push_back(std::move(b));
    key.a.push_back(std::move(a));
  }
  return key;
}

}  // namespace detail

inline SecretKey make_secret_key(const ParamsPtr& params, Rng& rng) {
  SecretKey sk;
  sk.coeffs = sample_ternary(params->degree(), rng);
  sk.s = detail::small_poly_ntt(params->q_basis(), sk.coeffs);
  return sk;
}

inline PublicKey make_public_key(const ParamsPtr& params, const SecretKey& sk, Rng& rng) {
  const auto& basis = params->q_basis();
  RingPoly a = sample_uniform_ntt(basis, rng);
  RingPoly e = detail::small_poly_ntt(basis, sample_gaussian(params->degree(), params->err_stddev(), rng));
  RingPoly as = a;
  mul_pointwise_inplace(as, sk.s);
  add_inplace(as, e);
  return {negate(std::move(as)), std::move(a)};
}

inline RelinKey make_relin_key(const ParamsPtr& params, const SecretKey& sk, Rng& rng) {
  RingPoly s2 = sk.s;
  mul_pointwise_inplace(s2, sk.s);
  return {detail::make_switch_key(*params, s2, sk, rng)};
}

inline GaloisKey make_galois_key(const ParamsPtr& params, const SecretKey& sk, std::size_t step, Rng& rng) {
  if (step == 0 || step >= params->slot_count()) {
    throw OutOfRange("rotation step " + std::to_string(step) + " outside [1, M-1]");
  }
  GaloisKey gk;
  gk.element = galois_element(step, params->degree());
  gk.permutation = galois_permutation(params->q_basis()->ntt(0), gk.element);
  const RingPoly rotated_secret = apply_galois_ntt(sk.s, gk.permutation);
  gk.key = detail::make_switch_key(*params, rotated_secret, sk, rng);
  return gk;
}

/// Power-of-two steps 1, 2, 4, ... covering a rotate-and-sum over n slots.
inline std::set<std::size_t> power_of_two_steps(std::size_t n) {
  std::set<std::size_t> steps;
  for (std::size_t s = 1; s < n; s <<= 1) steps.insert(s);
  return steps;
}

/// KeyGen: secret, public, relinearization and one Galois key per step.
/// Deterministic when a seed is given.
inline KeySet keygen(const ParamsPtr& params, const std::set<std::size_t>& rotation_steps,
                     std::optional<std::uint64_t> seed = std::nullopt) {
  Rng rng(seed);
  KeySet keys;
  keys.sk = make_secret_key(params, rng);
  keys.pk = make_public_key(params, keys.sk, rng);
  keys.rlk = make_relin_key(params, keys.sk, rng);
  for (auto step : rotation_steps) keys.galois.by_step.emplace(step, make_galois_key(params, keys.sk, step, rng));
  return keys;
}

}  // namespace evfc
