#pragma once

// Encrypted centroid-feedback pipeline.
//
// Designer (offline): m_w = Pack([-n/2 .. n/2-1, 0 ..]), c_K = Enc(Pack([round(delta K), 0 ..])).
// Camera:   c_I = Enc(Pack([I, 0 ..])), pixel i in slot i + n/2.
// Server:   c_w^0 = m_w . c_I, c^0 = c_I; for l = 1..L, L = ceil(log2 n):
//             c^l = c^(l-1) + Rotate(c^(l-1), 2^(l-1))   (both chains)
//           num = c_K x c_w^L, den = c^L.
// Actuator: u = (slot 0 of num) / (delta * slot 0 of den).
//
// Slots n..M-1 are zero after packing, so rotation wrap-around adds zeros
// into slot 0 even when 2^(l-1) exceeds the remaining data width.
//
// The naive baseline encrypts each pixel as a constant polynomial and sums
// with n plaintext products and 2(n-1) additions.

#include <bit>
#include <cstdint>
#include <vector>

#include "evfc/packing.hpp"
#include "evfc/vision.hpp"

namespace evfc {

/// Number of rotate-and-add rounds for an n-wide reduction.
inline std::size_t tree_depth(std::size_t n) { return n <= 1 ? 0 : static_cast<std::size_t>(std::bit_width(n - 1)); }

struct OfflineBundle {
  Plaintext m_w;
  Ciphertext c_K;
  std::size_t n = 0;
  double delta = 1.0;
  double gain = 0.0;
  std::int64_t k_quantized = 0;
};

/// Offline material for the naive baseline: constant weight plaintexts and
/// c_K as a degree-zero encryption of round(delta K).
struct NaiveBundle {
  std::vector<Plaintext> weights;
  Ciphertext c_K;
  std::size_t n = 0;
  double delta = 1.0;
};

struct ServerResult {
  Ciphertext c_num;
  Ciphertext c_den;
};

/// Slot-0 integers recovered by the actuator.
struct Reading {
  std::int64_t num = 0;
  std::int64_t den = 0;

  friend bool operator==(const Reading&, const Reading&) = default;
};

/// Partial chains per round, for inspection; index l holds c^l.
struct ChainTrace {
  std::vector<Ciphertext> num;
  std::vector<Ciphertext> den;
};

inline void check_pipeline_config(const SchemeParams& params, double gain, double delta, std::size_t n) {
  if (n == 0 || n % 2 != 0) throw OutOfRange("pixel count must be even and positive");
  if (n > params.slot_count()) {
    throw ImageTooWide(std::to_string(n) + " pixels do not fit in " + std::to_string(params.slot_count()) + " slots");
  }
  if (!(delta > 0.0)) throw OverflowConfig("scaling factor must be positive");
  if (!overflow_safe(gain, delta, n, params.t())) {
    throw OverflowConfig("delta*|K|*(n/2)*255*n = " + std::to_string(worst_case_numerator(gain, delta, n)) +
                         " reaches t/2 = " + std::to_string(static_cast<double>(params.t()) / 2));
  }
}

inline CleartextVector weight_vector(const BatchEncoder& encoder, std::size_t n) {
  std::vector<std::int64_t> w(n);
  for (std::size_t j = 0; j < n; ++j) w[j] = static_cast<std::int64_t>(j) - static_cast<std::int64_t>(n / 2);
  return encoder.make_vector(w);
}

inline OfflineBundle offline_setup(const Encryptor& enc, const BatchEncoder& encoder, double gain, double delta,
                                   std::size_t n, Rng& rng) {
  const SchemeParams& params = *enc.params();
  check_pipeline_config(params, gain, delta, n);
  OfflineBundle b;
  b.n = n;
  b.delta = delta;
  b.gain = gain;
  b.k_quantized = quantize_gain(gain, delta, params.t());
  b.m_w = encoder.pack(weight_vector(encoder, n));
  const std::int64_t k_slot[] = {b.k_quantized};
  b.c_K = enc.encrypt(encoder.pack(encoder.make_vector(k_slot)), rng);
  return b;
}

inline NaiveBundle naive_offline_setup(const Encryptor& enc, double gain, double delta, std::size_t n, Rng& rng) {
  const SchemeParams& params = *enc.params();
  check_pipeline_config(params, gain, delta, n);
  NaiveBundle b;
  b.n = n;
  b.delta = delta;
  b.weights.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    b.weights.push_back(Plaintext::constant(params, static_cast<std::int64_t>(j) - static_cast<std::int64_t>(n / 2)));
  }
  b.c_K = enc.encrypt(Plaintext::constant(params, quantize_gain(gain, delta, params.t())), rng);
  return b;
}

/// One encryption per frame.
inline Ciphertext camera_encrypt(const Encryptor& enc, const BatchEncoder& encoder, const Image& img, Rng& rng) {
  img.validate();
  if (img.size() > encoder.slot_count()) throw ImageTooWide("image wider than the slot count");
  std::vector<std::int64_t> lead(img.pixels.begin(), img.pixels.end());
  return enc.encrypt(encoder.pack(encoder.make_vector(lead)), rng);
}

inline ServerResult server_evaluate(const Evaluator& eval, const OfflineBundle& bundle, const Ciphertext& c_I,
                                    const EvaluationKeys& keys, ChainTrace* trace = nullptr) {
  Ciphertext num = eval.pmult(bundle.m_w, c_I);
  Ciphertext den = c_I;
  if (trace) {
    trace->num.assign(1, num);
    trace->den.assign(1, den);
  }
  const std::size_t rounds = tree_depth(bundle.n);
  for (std::size_t l = 1; l <= rounds; ++l) {
    const std::size_t step = std::size_t{1} << (l - 1);
    eval.add_inplace(num, eval.rotate(num, step, keys.galois));
    eval.add_inplace(den, eval.rotate(den, step, keys.galois));
    if (trace) {
      trace->num.push_back(num);
      trace->den.push_back(den);
    }
  }
  return {eval.cmult(bundle.c_K, num, keys.relin), std::move(den)};
}

inline Reading actuator_read(const SchemeParams& params, const BatchEncoder& encoder, const SecretKey& sk,
                             const ServerResult& r) {
  return {encoder.unpack(decrypt(params, sk, r.c_num))[0], encoder.unpack(decrypt(params, sk, r.c_den))[0]};
}

inline double control_from_reading(const Reading& r, double delta) {
  if (r.den == 0) throw ZeroDenominator("denominator is zero (all-dark frame)");
  return static_cast<double>(r.num) / (delta * static_cast<double>(r.den));
}

inline double actuator_decode(const SchemeParams& params, const BatchEncoder& encoder, const SecretKey& sk,
                              const ServerResult& r, double delta) {
  return control_from_reading(actuator_read(params, encoder, sk, r), delta);
}

/// n encryptions, one constant polynomial per pixel.
inline std::vector<Ciphertext> naive_camera_encrypt(const Encryptor& enc, const Image& img, Rng& rng) {
  img.validate();
  std::vector<Ciphertext> out;
  out.reserve(img.size());
  for (int v : img.pixels) out.push_back(enc.encrypt(Plaintext::constant(*enc.params(), v), rng));
  return out;
}

inline ServerResult naive_server_evaluate(const Evaluator& eval, const NaiveBundle& bundle,
                                          const std::vector<Ciphertext>& pixels, const RelinKey& rlk) {
  if (pixels.size() != bundle.n || pixels.empty()) throw ParameterMismatch("expected one ciphertext per pixel");
  Ciphertext num = eval.pmult(bundle.weights[0], pixels[0]);
  for (std::size_t j = 1; j < pixels.size(); ++j) eval.add_inplace(num, eval.pmult(bundle.weights[j], pixels[j]));
  Ciphertext den = pixels[0];
  for (std::size_t j = 1; j < pixels.size(); ++j) eval.add_inplace(den, pixels[j]);
  return {eval.cmult(bundle.c_K, num, rlk), std::move(den)};
}

inline Reading naive_actuator_read(const SchemeParams& params, const SecretKey& sk, const ServerResult& r) {
  return {decrypt(params, sk, r.c_num).coeff(0), decrypt(params, sk, r.c_den).coeff(0)};
}

}  // namespace evfc
