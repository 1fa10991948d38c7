#include <gtest/gtest.h>

#include <future>

#include "evfc/net.hpp"

namespace evfc {
namespace {

class Wire : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    params_ = setup("toy");
    keys_ = new KeySet(keygen(params_, {1, 2, 4}, 8));
  }
  static void TearDownTestSuite() {
    delete keys_;
    keys_ = nullptr;
  }

  Plaintext random_plain() {
    std::vector<std::int64_t> c(params_->degree());
    for (auto& v : c) v = static_cast<std::int64_t>(rng_.uniform(1u << 20));
    return Plaintext::from_coefficients(*params_, c);
  }

  static inline ParamsPtr params_;
  static inline KeySet* keys_ = nullptr;
  Rng rng_{12};
};

TEST_F(Wire, HeaderLayout) {
  const std::string f = encode_frame(PayloadKind::ciphertext, 0x0102030405060708ULL, "abc");
  ASSERT_EQ(f.size(), kHeaderSize + 3 + kTrailerSize);
  EXPECT_EQ(f.substr(0, 4), "EVFC");
  EXPECT_EQ(static_cast<unsigned char>(f[4]), kFormatVersion & 0xff);
  EXPECT_EQ(static_cast<unsigned char>(f[5]), kFormatVersion >> 8);
  EXPECT_EQ(static_cast<unsigned char>(f[6]), 5);
  EXPECT_EQ(static_cast<unsigned char>(f[7]), 0x08);  // little-endian digest
  EXPECT_EQ(static_cast<unsigned char>(f[14]), 0x01);
  EXPECT_EQ(static_cast<unsigned char>(f[15]), 3);  // body length
  EXPECT_EQ(f.substr(23, 3), "abc");
  const Frame back = decode_frame(f);
  EXPECT_EQ(back.kind, PayloadKind::ciphertext);
  EXPECT_EQ(back.digest, 0x0102030405060708ULL);
  EXPECT_EQ(back.body, "abc");
}

TEST_F(Wire, CiphertextRoundTripDecryptsIdentically) {
  const Plaintext m = random_plain();
  const Ciphertext c = encrypt(*params_, keys_->pk, m, rng_);
  const std::string bytes = serialize(*params_, c);
  const Ciphertext back = deserialize<Ciphertext>(*params_, bytes);
  EXPECT_EQ(back, c);
  EXPECT_EQ(decrypt(*params_, keys_->sk, back), m);
  EXPECT_EQ(serialize(*params_, back), bytes);
}

TEST_F(Wire, KeysAndPlaintextsRoundTrip) {
  const Plaintext m = random_plain();
  EXPECT_EQ(deserialize<Plaintext>(*params_, serialize(*params_, m)), m);
  const PublicKey pk = deserialize<PublicKey>(*params_, serialize(*params_, keys_->pk));
  EXPECT_EQ(pk.p0, keys_->pk.p0);
  EXPECT_EQ(pk.p1, keys_->pk.p1);
  const SecretKey sk = deserialize<SecretKey>(*params_, serialize(*params_, keys_->sk));
  EXPECT_EQ(sk.s, keys_->sk.s);
  EXPECT_EQ(sk.coeffs, keys_->sk.coeffs);
  const RelinKey rlk = deserialize<RelinKey>(*params_, serialize(*params_, keys_->rlk));
  EXPECT_EQ(rlk.key.b, keys_->rlk.key.b);
  EXPECT_EQ(rlk.key.a, keys_->rlk.key.a);
  const GaloisKeys gk = deserialize<GaloisKeys>(*params_, serialize(*params_, keys_->galois));
  ASSERT_EQ(gk.size(), 3u);
  for (const auto& [step, key] : keys_->galois.by_step) {
    EXPECT_EQ(gk.by_step.at(step).element, key.element);
    EXPECT_EQ(gk.by_step.at(step).permutation, key.permutation);
    EXPECT_EQ(gk.by_step.at(step).key.b, key.key.b);
  }
}

TEST_F(Wire, DeserializedKeysStillWork) {
  const GaloisKeys gk = deserialize<GaloisKeys>(*params_, serialize(*params_, keys_->galois));
  const RelinKey rlk = deserialize<RelinKey>(*params_, serialize(*params_, keys_->rlk));
  const BatchEncoder be(params_);
  std::vector<std::int64_t> lead{5, 6, 7, 8};
  const Ciphertext c = encrypt(*params_, keys_->pk, be.pack(be.make_vector(lead)), rng_);
  const Evaluator eval(params_);
  const Ciphertext r = eval.cmult(eval.rotate(c, 1, gk), c, rlk);
  const CleartextVector x = be.unpack(decrypt(*params_, keys_->sk, r));
  EXPECT_EQ(x[0], 30);
  EXPECT_EQ(x[1], 42);
}

TEST_F(Wire, ParamsRoundTrip) {
  for (const char* name : {"toy", "desk"}) {
    const auto p = setup(name);
    const auto back = deserialize_params(serialize_params(*p));
    EXPECT_EQ(back->digest(), p->digest());
    EXPECT_EQ(back->q_chain(), p->q_chain());
    EXPECT_EQ(back->t(), p->t());
    EXPECT_EQ(back->name(), name);
  }
}

TEST_F(Wire, TruncatedStreamDetected) {
  const std::string bytes = serialize(*params_, encrypt(*params_, keys_->pk, random_plain(), rng_));
  for (std::size_t cut : {std::size_t{0}, std::size_t{10}, kHeaderSize, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize<Ciphertext>(*params_, std::string_view(bytes).substr(0, cut)), TruncatedStream) << cut;
  }
}

TEST_F(Wire, CorruptionDetected) {
  std::string bytes = serialize(*params_, encrypt(*params_, keys_->pk, random_plain(), rng_));
  bytes[kHeaderSize + 100] ^= 0x10;
  EXPECT_THROW(deserialize<Ciphertext>(*params_, bytes), ChecksumFail);
}

TEST_F(Wire, VersionMismatchDetected) {
  std::string bytes = serialize(*params_, random_plain());
  bytes[4] = static_cast<char>(kFormatVersion + 1);
  EXPECT_THROW(deserialize<Plaintext>(*params_, bytes), VersionMismatch);
}

TEST_F(Wire, KindAndParameterChecks) {
  const std::string ct = serialize(*params_, encrypt(*params_, keys_->pk, random_plain(), rng_));
  EXPECT_THROW(deserialize<Plaintext>(*params_, ct), ProtocolDesync);
  EXPECT_THROW(deserialize<Ciphertext>(*setup("desk"), ct), ParameterMismatch);
  std::string junk = ct;
  junk[0] = 'X';
  EXPECT_THROW(decode_frame(junk), ProtocolDesync);
}

TEST_F(Wire, MessagesRoundTrip) {
  const Message m{MessageTag::result, 42, {0.25, -3.5}, {"abc", std::string(1000, 'z')}};
  const Message back = decode_message(encode_message(m, 7), 7);
  EXPECT_EQ(back.tag, MessageTag::result);
  EXPECT_EQ(back.counter, 42u);
  EXPECT_EQ(back.scalars, m.scalars);
  EXPECT_EQ(back.items, m.items);
  EXPECT_THROW(decode_message(encode_message(m, 7), 8), ParameterMismatch);
}

TEST(Endpoint, Parse) {
  const Endpoint e = Endpoint::parse("127.0.0.1:9000");
  EXPECT_EQ(e.host, "127.0.0.1");
  EXPECT_EQ(e.port, 9000);
  EXPECT_EQ(Endpoint::parse(":80").host, "127.0.0.1");
  EXPECT_THROW(Endpoint::parse("nohost"), OutOfRange);
  EXPECT_THROW(Endpoint::parse("h:70000"), OutOfRange);
}

TEST(Transport, UnreachablePeerReported) {
  // port 1 is privileged and unused on loopback
  EXPECT_THROW(connect_with_retry({"127.0.0.1", 1}, std::chrono::milliseconds(200)), PeerUnavailable);
  Listener idle({"127.0.0.1", 0});
  EXPECT_THROW(idle.accept(std::chrono::milliseconds(50)), PeerUnavailable);
}

TEST(Transport, FramesCrossLoopback) {
  Listener l({"127.0.0.1", 0});
  auto peer = std::async(std::launch::async, [at = l.endpoint()] {
    Channel c(connect_with_retry(at, std::chrono::seconds(2)), 99, std::chrono::seconds(2));
    c.hello(RoleId::camera);
    c.send({MessageTag::frame, 1, {1.5}, {"payload"}});
    c.send({MessageTag::frame, 3, {}, {}});
  });
  Channel server(l.accept(std::chrono::seconds(2)), 99, std::chrono::seconds(2));
  EXPECT_EQ(server.expect_hello(), RoleId::camera);
  const Message m = server.expect(MessageTag::frame, 1);
  EXPECT_EQ(m.items.at(0), "payload");
  EXPECT_THROW(server.expect(MessageTag::frame, 2), ProtocolDesync);
  peer.get();
  EXPECT_THROW(server.receive(), PeerUnavailable);
}

}  // namespace
}  // namespace evfc
