#include <gtest/gtest.h>

#include "evfc/packing.hpp"

namespace evfc {
namespace {

class Packing : public ::testing::Test {
 protected:
  CleartextVector random_vector() {
    CleartextVector x = be_.zeros();
    const auto t = static_cast<std::int64_t>(params_->t());
    for (std::size_t j = 0; j < x.size(); ++j) x.set(j, static_cast<std::int64_t>(rng_.uniform(params_->t())) - t / 2);
    return x;
  }
  std::int64_t reduce(i128 v) const {
    const auto t = static_cast<i128>(params_->t());
    i128 r = v % t;
    if (r < 0) r += t;
    return params_->plain_modulus().centered(static_cast<std::uint64_t>(r));
  }

  ParamsPtr params_ = setup("toy");
  BatchEncoder be_{params_};
  Rng rng_{77};
};

TEST_F(Packing, SlotCountIsHalfTheDegree) { EXPECT_EQ(be_.slot_count(), params_->degree() / 2); }

TEST_F(Packing, RoundTrip) {
  for (int i = 0; i < 200; ++i) {
    const CleartextVector x = random_vector();
    ASSERT_EQ(be_.unpack(be_.pack(x)), x);
  }
}

TEST_F(Packing, ZerosPackToZeroPolynomial) {
  const Plaintext m = be_.pack(be_.zeros());
  for (auto v : m.coefficients()) EXPECT_EQ(v, 0);
  EXPECT_EQ(be_.unpack(Plaintext::constant(*params_, 0)), be_.zeros());
}

TEST_F(Packing, ConstantPolynomialFillsEverySlot) {
  const CleartextVector x = be_.unpack(Plaintext::constant(*params_, -7));
  for (auto v : x.values()) EXPECT_EQ(v, -7);
}

TEST_F(Packing, HiddenRowStaysZero) {
  for (auto v : be_.hidden_row(be_.pack(random_vector()))) EXPECT_EQ(v, 0);
}

TEST_F(Packing, SumAndHadamardIdentities) {
  for (int i = 0; i < 200; ++i) {
    const CleartextVector x1 = random_vector(), x2 = random_vector();
    const Plaintext p1 = be_.pack(x1), p2 = be_.pack(x2);
    RingPoly s = p1.poly();
    add_inplace(s, p2.poly());
    const CleartextVector sum = be_.unpack(Plaintext(s));
    const CleartextVector prod = be_.unpack(Plaintext(poly_mul_mod(p1.poly(), p2.poly())));
    for (std::size_t j = 0; j < x1.size(); ++j) {
      ASSERT_EQ(sum[j], reduce(static_cast<i128>(x1[j]) + x2[j]));
      ASSERT_EQ(prod[j], reduce(static_cast<i128>(x1[j]) * x2[j]));
    }
  }
}

TEST_F(Packing, DoubleRoundTripKeepsSlotContent) {
  // an arbitrary plaintext also uses the hidden row; only the visible row survives
  std::vector<std::int64_t> c(params_->degree());
  for (auto& v : c) v = static_cast<std::int64_t>(rng_.uniform(1000)) - 500;
  const Plaintext m = Plaintext::from_coefficients(*params_, c);
  const CleartextVector x = be_.unpack(m);
  EXPECT_EQ(be_.unpack(be_.pack(x)), x);
}

TEST_F(Packing, NegativeEntriesComeBackCentered) {
  std::vector<std::int64_t> lead{-3, -2, -1, 0, 1, 2};
  const CleartextVector x = be_.unpack(be_.pack(be_.make_vector(lead)));
  for (std::size_t j = 0; j < lead.size(); ++j) EXPECT_EQ(x[j], lead[j]);
  EXPECT_EQ(x[lead.size()], 0);
}

TEST_F(Packing, OutOfRangeSlotRejected) {
  CleartextVector x = be_.zeros();
  const auto half = static_cast<std::int64_t>(params_->t() / 2);
  EXPECT_NO_THROW(x.set(0, -half));
  EXPECT_THROW(x.set(0, half + 1), OutOfRange);
  EXPECT_THROW(CleartextVector(std::vector<std::int64_t>{-half - 1}, params_->t()), OutOfRange);
  EXPECT_THROW(be_.pack(CleartextVector(3, params_->t())), ParameterMismatch);
}

}  // namespace
}  // namespace evfc
