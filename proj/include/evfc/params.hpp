#pragma once

// Scheme parameters (the common reference string (N, q, t)) with security
// validation and the built-in presets.

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "evfc/ring.hpp"

namespace evfc {

/// Requested parameters before prime generation.
struct ParamSpec {
  std::string name = "custom";
  std::size_t degree = 0;
  std::vector<int> q_bits;           // bit length of each ciphertext prime
  std::optional<std::uint64_t> t;    // plaintext modulus; derived when empty
  int t_bits = 48;                   // used when t is empty
  int lambda = 128;                  // 0 disables the security check
  double err_stddev = 3.2;
};

/// Maximum total log2(q) for a ring degree at a security level, for
/// uniform ternary secrets (homomorphic encryption standard tables).
inline int max_modulus_bits(std::size_t degree, int lambda) {
  static const std::map<int, std::map<std::size_t, int>> table{
      {128, {{1024, 27}, {2048, 54}, {4096, 109}, {8192, 218}, {16384, 438}, {32768, 881}}},
      {192, {{1024, 19}, {2048, 37}, {4096, 75}, {8192, 152}, {16384, 305}, {32768, 611}}},
      {256, {{1024, 14}, {2048, 29}, {4096, 58}, {8192, 118}, {16384, 237}, {32768, 476}}},
  };
  const auto level = table.find(lambda);
  if (level == table.end()) throw SecurityLevelTooLow("unsupported security level " + std::to_string(lambda));
  const auto row = level->second.find(degree);
  return row == level->second.end() ? 0 : row->second;
}

class SchemeParams {
 public:
  explicit SchemeParams(const ParamSpec& spec) : spec_(spec) {
    const std::size_t n = spec.degree;
    if (n < 4 || !std::has_single_bit(n)) throw InvalidModulus("ring degree must be a power of two >= 4");
    if (spec.q_bits.empty()) throw InvalidModulus("ciphertext modulus chain is empty");
    const std::uint64_t two_n = 2 * n;

    std::uint64_t t = 0;
    if (spec.t) {
      t = *spec.t;
      if (!is_prime(t)) throw InvalidModulus("plaintext modulus must be prime");
      if (t % two_n != 1) throw InvalidModulus("plaintext modulus must be 1 mod 2N");
    } else {
      t = ntt_primes(spec.t_bits, 1, two_n).front();
    }

    // Group equal bit lengths so each group gets distinct primes.
    std::vector<std::uint64_t> chain(spec.q_bits.size());
    std::vector<std::uint64_t> used{t};
    std::map<int, std::vector<std::size_t>> by_bits;
    for (std::size_t i = 0; i < spec.q_bits.size(); ++i) by_bits[spec.q_bits[i]].push_back(i);
    for (const auto& [bits, slots] : by_bits) {
      const auto primes = ntt_primes(bits, slots.size(), two_n, used);
      for (std::size_t k = 0; k < slots.size(); ++k) chain[slots[k]] = primes[k];
      used.insert(used.end(), primes.begin(), primes.end());
    }
    init(n, chain, t, used);
  }

  /// Reconstructs parameters from an explicit prime chain (deserialization).
  SchemeParams(const ParamSpec& spec, const std::vector<std::uint64_t>& chain, std::uint64_t t) : spec_(spec) {
    std::vector<std::uint64_t> used(chain);
    used.push_back(t);
    init(spec.degree, chain, t, used);
  }

  const std::string& name() const noexcept { return spec_.name; }
  const ParamSpec& spec() const noexcept { return spec_; }
  int lambda() const noexcept { return spec_.lambda; }
  double err_stddev() const noexcept { return spec_.err_stddev; }
  std::size_t degree() const noexcept { return degree_; }
  std::size_t slot_count() const noexcept { return degree_ / 2; }

  const BasisPtr& q_basis() const noexcept { return q_basis_; }
  const BasisPtr& t_basis() const noexcept { return t_basis_; }
  const BasisPtr& qp_basis() const noexcept { return qp_basis_; }
  const Modulus& plain_modulus() const noexcept { return t_basis_->modulus(0); }
  std::uint64_t t() const noexcept { return plain_modulus().value(); }
  std::vector<std::uint64_t> q_chain() const {
    std::vector<std::uint64_t> out;
    for (const auto& m : q_basis_->moduli()) out.push_back(m.value());
    return out;
  }
  int q_bit_count() const noexcept { return q_basis_->total_bit_count(); }
  double log2_q() const { return static_cast<double>(mpz_sizeinbase(q_basis_->product().get_mpz_t(), 2)); }

  /// floor(Q / t) mod q_i.
  const std::vector<std::uint64_t>& delta_residues() const noexcept { return delta_residues_; }
  /// Q mod t.
  std::uint64_t q_mod_t() const noexcept { return q_mod_t_; }
  std::size_t aux_count() const noexcept { return qp_basis_->size() - q_basis_->size(); }
  /// (Q / q_i) mod p_j, row-major over i.
  const std::vector<std::uint64_t>& punctured_mod_aux() const noexcept { return punctured_mod_aux_; }
  /// Q mod p_j.
  const std::vector<std::uint64_t>& q_mod_aux() const noexcept { return q_mod_aux_; }

  /// Stable 64-bit digest of (N, q chain, t) used to tag serialized objects.
  std::uint64_t digest() const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xff;
        h *= 1099511628211ULL;
      }
    };
    mix(degree_);
    for (const auto& m : q_basis_->moduli()) mix(m.value());
    mix(t());
    return h;
  }

 private:
  void init(std::size_t n, const std::vector<std::uint64_t>& chain, std::uint64_t t,
            std::vector<std::uint64_t> used) {
    degree_ = n;
    q_basis_ = std::make_shared<const RnsBasis>(n, chain);
    t_basis_ = std::make_shared<const RnsBasis>(n, std::vector<std::uint64_t>{t});
    if (q_basis_->product() <= mpz_class(std::to_string(t))) {
      throw InvalidModulus("plaintext modulus must be smaller than q");
    }
    if (spec_.lambda > 0) {
      const int limit = max_modulus_bits(n, spec_.lambda);
      if (q_basis_->total_bit_count() > limit) {
        throw SecurityLevelTooLow("N = " + std::to_string(n) + " with a " +
                                  std::to_string(q_basis_->total_bit_count()) + "-bit q cannot reach " +
                                  std::to_string(spec_.lambda) + "-bit security (limit " +
                                  std::to_string(limit) + " bits)");
      }
    }

    // Auxiliary primes so that Q*P exceeds the tensor product range N*Q^2.
    const int needed = q_basis_->total_bit_count() + std::bit_width(n) + 2;
    const std::size_t aux = static_cast<std::size_t>((needed + 58) / 59);
    const auto aux_primes = ntt_primes(60, aux, 2 * n, used);
    std::vector<std::uint64_t> qp(chain);
    qp.insert(qp.end(), aux_primes.begin(), aux_primes.end());
    qp_basis_ = std::make_shared<const RnsBasis>(n, qp);

    const mpz_class& q = q_basis_->product();
    const mpz_class tz(std::to_string(t));
    const mpz_class delta = q / tz;
    q_mod_t_ = mpz_class(q % tz).get_ui();
    for (const auto& m : q_basis_->moduli()) delta_residues_.push_back(mpz_fdiv_ui(delta.get_mpz_t(), m.value()));
    for (std::size_t i = 0; i < chain.size(); ++i) {
      const mpz_class punctured = q / mpz_class(std::to_string(chain[i]));
      for (auto p : aux_primes) punctured_mod_aux_.push_back(mpz_fdiv_ui(punctured.get_mpz_t(), p));
    }
    for (auto p : aux_primes) q_mod_aux_.push_back(mpz_fdiv_ui(q.get_mpz_t(), p));
  }

  ParamSpec spec_;
  std::size_t degree_ = 0;
  BasisPtr q_basis_;
  BasisPtr t_basis_;
  BasisPtr qp_basis_;
  std::vector<std::uint64_t> delta_residues_;
  std::uint64_t q_mod_t_ = 0;
  std::vector<std::uint64_t> punctured_mod_aux_;
  std::vector<std::uint64_t> q_mod_aux_;
};

using ParamsPtr = std::shared_ptr<const SchemeParams>;

/// Built-in parameter sets.
///  - "paper": N = 2^14, q = (60, 30 x 8, 60) bits = 360 bits, 128-bit security.
///  - "desk":  N = 2^13, q = 4 x 54 bits = 216 bits, 128-bit security.
///  - "toy":   N = 2^8, three 60-bit primes, no security (unit tests only).
inline ParamSpec preset_spec(const std::string& name) {
  ParamSpec s;
  s.name = name;
  if (name == "paper") {
    s.degree = 1 << 14;
    s.q_bits = {60, 30, 30, 30, 30, 30, 30, 30, 30, 60};
  } else if (name == "desk") {
    s.degree = 1 << 13;
    s.q_bits = {54, 54, 54, 54};
  } else if (name == "toy") {
    s.degree = 1 << 8;
    s.q_bits = {60, 60, 60};
    s.lambda = 0;
  } else {
    throw InvalidModulus("unknown preset '" + name + "'");
  }
  // Shared 48-bit plaintext prime, 1 mod 2^15 so it serves every preset.
  s.t = ntt_primes(48, 1, std::uint64_t{1} << 15).front();
  return s;
}

inline ParamsPtr setup(const ParamSpec& spec) { return std::make_shared<const SchemeParams>(spec); }

inline ParamsPtr setup(const std::string& preset) {
  static std::map<std::string, ParamsPtr> cache;
  static std::mutex lock;
  std::lock_guard guard(lock);
  auto it = cache.find(preset);
  if (it != cache.end()) return it->second;
  auto p = setup(preset_spec(preset));
  cache.emplace(preset, p);
  return p;
}

}  // namespace evfc
