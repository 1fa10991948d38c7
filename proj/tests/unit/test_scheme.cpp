#include <gtest/gtest.h>

#include "evfc/packing.hpp"
#include "oracles.hpp"

namespace evfc {
namespace {

class ToyScheme : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    params_ = setup("toy");
    keys_ = new KeySet(keygen(params_, power_of_two_steps(params_->slot_count()), 11));
  }
  static void TearDownTestSuite() {
    delete keys_;
    keys_ = nullptr;
  }

  Plaintext random_plain() {
    std::vector<std::int64_t> c(params_->degree());
    const auto t = static_cast<std::int64_t>(params_->t());
    for (auto& v : c) v = static_cast<std::int64_t>(rng_.uniform(params_->t())) - t / 2;
    return Plaintext::from_coefficients(*params_, c);
  }
  Ciphertext enc(const Plaintext& m) { return encrypt(*params_, keys_->pk, m, rng_); }
  Plaintext dec(const Ciphertext& c) { return decrypt(*params_, keys_->sk, c); }
  double budget(const Ciphertext& c) { return noise_budget(*params_, keys_->sk, c).budget_bits; }
  CleartextVector random_vector() {
    CleartextVector x = encoder().zeros();
    const auto t = static_cast<std::int64_t>(params_->t());
    for (std::size_t j = 0; j < x.size(); ++j) x.set(j, static_cast<std::int64_t>(rng_.uniform(params_->t())) - t / 2);
    return x;
  }
  BatchEncoder encoder() const { return BatchEncoder(params_); }

  static inline ParamsPtr params_;
  static inline KeySet* keys_ = nullptr;
  Rng rng_{2024};
  Evaluator eval_{params_};
};

TEST_F(ToyScheme, SecretKeyIsTernary) {
  for (auto v : keys_->sk.coeffs) EXPECT_TRUE(v >= -1 && v <= 1);
}

TEST_F(ToyScheme, KeygenIsDeterministicUnderSeed) {
  const KeySet a = keygen(params_, {1, 2}, 99);
  const KeySet b = keygen(params_, {1, 2}, 99);
  const KeySet c = keygen(params_, {1, 2}, 100);
  EXPECT_EQ(a.sk.coeffs, b.sk.coeffs);
  EXPECT_EQ(a.pk.p0, b.pk.p0);
  EXPECT_EQ(a.rlk.key.b, b.rlk.key.b);
  EXPECT_EQ(a.galois.by_step.at(2).key.a, b.galois.by_step.at(2).key.a);
  EXPECT_NE(a.sk.coeffs, c.sk.coeffs);
}

TEST_F(ToyScheme, KeygenRejectsStepsOutsideSlotRange) {
  EXPECT_THROW(keygen(params_, {0}, 1), OutOfRange);
  EXPECT_THROW(keygen(params_, {params_->slot_count()}, 1), OutOfRange);
}

TEST_F(ToyScheme, RoundTripRandomPlaintexts) {
  for (int i = 0; i < 1000; ++i) {
    const Plaintext m = random_plain();
    ASSERT_EQ(dec(enc(m)), m) << "trial " << i;
  }
}

TEST_F(ToyScheme, ZeroEncryptsToZero) {
  const Plaintext zero = Plaintext::constant(*params_, 0);
  const Plaintext got = dec(enc(zero));
  for (auto v : got.coefficients()) EXPECT_EQ(v, 0);
}

TEST_F(ToyScheme, EncryptionIsRandomized) {
  const Plaintext m = random_plain();
  const Ciphertext a = enc(m), b = enc(m);
  EXPECT_NE(a, b);
  EXPECT_EQ(dec(a), dec(b));
}

TEST_F(ToyScheme, FreshBudgetIsPositive) {
  const double b = budget(enc(random_plain()));
  EXPECT_GT(b, 0.0);
  // bounded by log2(q/t)
  EXPECT_LT(b, params_->q_bit_count() - std::bit_width(params_->t()) + 1);
}

TEST_F(ToyScheme, AdditionIdentityInverseAndSum) {
  const Plaintext m = random_plain();
  const Ciphertext c = enc(m);
  EXPECT_EQ(dec(eval_.add(c, enc(Plaintext::constant(*params_, 0)))), m);

  std::vector<std::int64_t> neg = m.coefficients();
  for (auto& v : neg) v = -v;
  for (auto v : dec(eval_.add(c, enc(Plaintext::from_coefficients(*params_, neg)))).coefficients()) EXPECT_EQ(v, 0);

  const Modulus& t = params_->plain_modulus();
  for (int i = 0; i < 20; ++i) {
    const Plaintext a = random_plain(), b = random_plain();
    const Plaintext sum = dec(eval_.add(enc(a), enc(b)));
    for (std::size_t k = 0; k < params_->degree(); ++k) {
      ASSERT_EQ(sum.coeff(k), t.centered(t.from_signed(a.coeff(k) + b.coeff(k))));
    }
  }
}

TEST_F(ToyScheme, PlainMultiplication) {
  const Plaintext m = random_plain();
  const Ciphertext c = enc(m);
  EXPECT_EQ(dec(eval_.pmult(Plaintext::constant(*params_, 1), c)), m);
  for (auto v : dec(eval_.pmult(Plaintext::constant(*params_, 0), c)).coefficients()) EXPECT_EQ(v, 0);
  for (int i = 0; i < 10; ++i) {
    const Plaintext k = random_plain(), x = random_plain();
    EXPECT_EQ(dec(eval_.pmult(k, enc(x))), Plaintext(poly_mul_mod(k.poly(), x.poly())));
  }
}

TEST_F(ToyScheme, CipherMultiplication) {
  const Plaintext m = random_plain();
  const Ciphertext c = enc(m);
  const Ciphertext prod_one = eval_.cmult(c, enc(Plaintext::constant(*params_, 1)), keys_->rlk);
  EXPECT_EQ(prod_one.size(), 2u);
  EXPECT_EQ(dec(prod_one), m);
  for (auto v : dec(eval_.cmult(c, enc(Plaintext::constant(*params_, 0)), keys_->rlk)).coefficients()) EXPECT_EQ(v, 0);
  for (int i = 0; i < 10; ++i) {
    const Plaintext a = random_plain(), b = random_plain();
    EXPECT_EQ(dec(eval_.cmult(enc(a), enc(b), keys_->rlk)), Plaintext(poly_mul_mod(a.poly(), b.poly())));
  }
}

TEST_F(ToyScheme, SimdIdentitiesHoldSlotwise) {
  const BatchEncoder be = encoder();
  const Modulus& t = params_->plain_modulus();
  for (int i = 0; i < 20; ++i) {
    const CleartextVector x1 = random_vector(), x2 = random_vector();
    const Ciphertext c1 = enc(be.pack(x1)), c2 = enc(be.pack(x2));
    const CleartextVector sum = be.unpack(dec(eval_.add(c1, c2)));
    const CleartextVector pm = be.unpack(dec(eval_.pmult(be.pack(x1), c2)));
    const CleartextVector cm = be.unpack(dec(eval_.cmult(c1, c2, keys_->rlk)));
    for (std::size_t j = 0; j < x1.size(); ++j) {
      ASSERT_EQ(sum[j], t.centered(t.from_signed(x1[j] + x2[j])));
      const std::uint64_t h = t.mul(t.from_signed(x1[j]), t.from_signed(x2[j]));
      ASSERT_EQ(pm[j], t.centered(h));
      ASSERT_EQ(cm[j], t.centered(h));
    }
  }
}

TEST_F(ToyScheme, RotateByTwoShiftsLeft) {
  const BatchEncoder be = encoder();
  std::vector<std::int64_t> lead{10, 11, 12, 13, 14, 15};
  CleartextVector x = be.make_vector(lead);
  const CleartextVector r = be.unpack(dec(eval_.rotate(enc(be.pack(x)), 2, keys_->galois)));
  EXPECT_EQ(r[0], 12);
  EXPECT_EQ(r[3], 15);
  EXPECT_EQ(r[4], 0);
  // a and b wrap around to the far end
  EXPECT_EQ(r[be.slot_count() - 2], 10);
  EXPECT_EQ(r[be.slot_count() - 1], 11);
}

TEST_F(ToyScheme, RotateByFullCycleIsIdentity) {
  const BatchEncoder be = encoder();
  const CleartextVector x = random_vector();
  EXPECT_EQ(be.unpack(dec(eval_.rotate(enc(be.pack(x)), be.slot_count(), keys_->galois))), x);
}

TEST_F(ToyScheme, RotateComposesPowerOfTwoKeys) {
  const BatchEncoder be = encoder();
  const CleartextVector x = random_vector();
  const Ciphertext c = enc(be.pack(x));
  for (std::size_t step : {5u, 7u, 100u}) {
    const CleartextVector r = be.unpack(dec(eval_.rotate(c, step, keys_->galois)));
    const auto want = oracle::rotate_left({x.values().begin(), x.values().end()}, step);
    EXPECT_EQ(std::vector<std::int64_t>(r.values().begin(), r.values().end()), want) << step;
  }
}

TEST_F(ToyScheme, EveryPowerOfTwoRotationMatchesShift) {
  const BatchEncoder be = encoder();
  const CleartextVector x = random_vector();
  const Ciphertext c = enc(be.pack(x));
  for (std::size_t step = 1; step < be.slot_count(); step <<= 1) {
    const CleartextVector r = be.unpack(dec(eval_.rotate(c, step, keys_->galois)));
    const auto want = oracle::rotate_left({x.values().begin(), x.values().end()}, step);
    EXPECT_EQ(std::vector<std::int64_t>(r.values().begin(), r.values().end()), want) << step;
  }
}

TEST_F(ToyScheme, RotationsAdd) {
  const BatchEncoder be = encoder();
  const CleartextVector x = random_vector();
  const Ciphertext c = enc(be.pack(x));
  const std::size_t m = be.slot_count();
  for (auto [j1, j2] : {std::pair<std::size_t, std::size_t>{3, 9}, {64, 96}, {127, 2}}) {
    const auto twice = be.unpack(dec(eval_.rotate(eval_.rotate(c, j1, keys_->galois), j2, keys_->galois)));
    const auto once = be.unpack(dec(eval_.rotate(c, (j1 + j2) % m, keys_->galois)));
    EXPECT_EQ(twice, once);
  }
}

TEST_F(ToyScheme, MissingGaloisKeyReported) {
  const KeySet sparse = keygen(params_, {2}, 5);
  const Ciphertext c = encrypt(*params_, sparse.pk, random_plain(), rng_);
  EXPECT_NO_THROW(eval_.rotate(c, 2, sparse.galois));
  EXPECT_THROW(eval_.rotate(c, 3, sparse.galois), MissingGaloisKey);
}

TEST_F(ToyScheme, NoiseBudgetNeverIncreases) {
  const BatchEncoder be = encoder();
  const Ciphertext a = enc(be.pack(random_vector()));
  const Ciphertext b = enc(be.pack(random_vector()));
  const double ba = budget(a), bb = budget(b);
  EXPECT_LE(budget(eval_.add(a, a)), ba);
  EXPECT_LE(budget(eval_.add(a, b)), std::max(ba, bb));
  const Ciphertext p = eval_.pmult(be.pack(random_vector()), a);
  EXPECT_LE(budget(p), ba);
  const Ciphertext r = eval_.rotate(p, 1, keys_->galois);
  EXPECT_LE(budget(r), budget(p));
  const Ciphertext m = eval_.cmult(a, b, keys_->rlk);
  EXPECT_LT(budget(m), std::min(ba, bb));
}

TEST_F(ToyScheme, RepeatedSquaringExhaustsBudget) {
  const Modulus& t = params_->plain_modulus();
  Ciphertext c = enc(Plaintext::constant(*params_, 3));
  std::uint64_t expected = 3;
  double last = budget(c);
  bool overflowed = false;
  for (int round = 0; round < 8 && !overflowed; ++round) {
    c = eval_.cmult(c, c, keys_->rlk);
    expected = t.mul(expected, expected);
    const double b = budget(c);
    EXPECT_LE(b, last);
    last = b;
    if (b <= 0.0) {
      overflowed = true;
      EXPECT_THROW(dec(c), NoiseOverflow);
      const Plaintext garbled = decrypt(*params_, keys_->sk, c, false);
      EXPECT_NE(garbled, Plaintext::constant(*params_, t.centered(expected)));
    } else {
      EXPECT_EQ(dec(c), Plaintext::constant(*params_, t.centered(expected))) << "round " << round;
    }
  }
  EXPECT_TRUE(overflowed);
}

TEST_F(ToyScheme, MismatchedParametersRejected) {
  const auto desk = setup("desk");
  const Ciphertext c = enc(random_plain());
  EXPECT_THROW(Evaluator(desk).add(c, c), ParameterMismatch);
  EXPECT_THROW(decrypt(*desk, keys_->sk, c), ParameterMismatch);
}

TEST(DeskScheme, NineGaloisKeysCoverFiveHundredPixels) {
  const auto p = setup("desk");
  std::set<std::size_t> steps;
  for (std::size_t s = 1; s <= 256; s <<= 1) steps.insert(s);
  EXPECT_EQ(steps, power_of_two_steps(500));
  const KeySet keys = keygen(p, steps, 3);
  EXPECT_EQ(keys.galois.size(), 9u);

  Rng rng(4);
  const BatchEncoder be(p);
  std::vector<std::int64_t> lead(500);
  for (auto& v : lead) v = static_cast<std::int64_t>(rng.uniform(256));
  const CleartextVector x = be.make_vector(lead);
  const Ciphertext c = encrypt(*p, keys.pk, be.pack(x), rng);
  EXPECT_GT(noise_budget(*p, keys.sk, c).budget_bits, 100.0);
  EXPECT_EQ(be.unpack(decrypt(*p, keys.sk, c)), x);
}

}  // namespace
}  // namespace evfc
