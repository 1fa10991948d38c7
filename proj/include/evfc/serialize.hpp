#pragma once

// Wire format. Every object travels as one frame:
//
//   offset  size  field
//   0       4     magic "EVFC"
//   4       2     format version (u16)
//   6       1     payload kind (u8)
//   7       8     parameter digest (u64)
//   15      8     body length in bytes (u64)
//   23      L     body
//   23+L    4     CRC32 of bytes [0, 23+L)
//
// All integers are little-endian. Polynomials are written as
// u32 residue count followed by each residue's N values (u64), NTT form.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "evfc/pipeline.hpp"

namespace evfc {

inline constexpr char kMagic[4] = {'E', 'V', 'F', 'C'};
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 23;
inline constexpr std::size_t kTrailerSize = 4;

enum class PayloadKind : std::uint8_t {
  public_key = 1,
  secret_key = 2,
  relin_key = 3,
  galois_keys = 4,
  ciphertext = 5,
  plaintext = 6,
  control = 7,
  params = 8,
  bundle = 9,
};

inline const char* to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::public_key: return "public key";
    case PayloadKind::secret_key: return "secret key";
    case PayloadKind::relin_key: return "relinearization key";
    case PayloadKind::galois_keys: return "Galois keys";
    case PayloadKind::ciphertext: return "ciphertext";
    case PayloadKind::plaintext: return "plaintext";
    case PayloadKind::control: return "control message";
    case PayloadKind::params: return "parameters";
    case PayloadKind::bundle: return "offline bundle";
  }
  return "unknown";
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    buf_.append(s);
  }
  void words(std::span<const std::uint64_t> w) {
    if constexpr (std::endian::native == std::endian::little) {
      const std::size_t at = buf_.size();
      buf_.resize(at + 8 * w.size());
      std::memcpy(buf_.data() + at, w.data(), 8 * w.size());
    } else {
      for (auto v : w) u64(v);
    }
  }

  std::string& bytes() noexcept { return buf_; }
  std::string take() noexcept { return std::move(buf_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int b = 0; b < width; ++b) buf_.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view str() {
    const std::uint64_t n = u64();
    need(n);
    std::string_view s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void words(std::span<std::uint64_t> out) {
    need(8 * static_cast<std::uint64_t>(out.size()));
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), data_.data() + pos_, 8 * out.size());
      pos_ += 8 * out.size();
    } else {
      for (auto& v : out) v = get(8);
    }
  }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) throw ProtocolDesync(std::to_string(remaining()) + " trailing bytes after payload");
  }

 private:
  void need(std::uint64_t n) const {
    if (n > remaining()) throw TruncatedStream("payload ends early");
  }
  std::uint64_t get(int width) {
    need(static_cast<std::uint64_t>(width));
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large frames
  std::size_t at = 0;
  while (at < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - at, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + at), static_cast<uInt>(chunk));
    at += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

struct Frame {
  PayloadKind kind = PayloadKind::control;
  std::uint64_t digest = 0;
  std::string body;
};

inline std::string encode_frame(PayloadKind kind, std::uint64_t digest, std::string_view body) {
  ByteWriter w;
  w.bytes().append(kMagic, 4);
  w.u16(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  w.u64(digest);
  w.u64(body.size());
  w.bytes().append(body);
  w.u32(crc32_of(w.bytes()));
  return w.take();
}

/// Size of the complete frame whose header starts `bytes`; needs kHeaderSize bytes.
inline std::uint64_t frame_size_from_header(std::string_view header) {
  if (header.size() < kHeaderSize) throw TruncatedStream("frame header is incomplete");
  if (std::memcmp(header.data(), kMagic, 4) != 0) throw ProtocolDesync("bad magic; not an EVFC frame");
  ByteReader r(header.substr(4));
  const std::uint16_t version = r.u16();
  if (version != kFormatVersion) {
    throw VersionMismatch("frame version " + std::to_string(version) + ", expected " + std::to_string(kFormatVersion));
  }
  r.u8();
  r.u64();
  const std::uint64_t body = r.u64();
  if (body > (std::uint64_t{1} << 40)) throw ProtocolDesync("implausible body length");
  return kHeaderSize + body + kTrailerSize;
}

inline Frame decode_frame(std::string_view bytes) {
  const std::uint64_t total = frame_size_from_header(bytes);
  if (bytes.size() < total) throw TruncatedStream("frame needs " + std::to_string(total) + " bytes, have " +
                                                  std::to_string(bytes.size()));
  if (bytes.size() > total) throw ProtocolDesync("trailing bytes after frame");
  ByteReader trailer(bytes.substr(total - kTrailerSize));
  if (trailer.u32() != crc32_of(bytes.substr(0, total - kTrailerSize))) throw ChecksumFail("frame CRC32 mismatch");
  ByteReader r(bytes.substr(6));
  Frame f;
  f.kind = static_cast<PayloadKind>(r.u8());
  f.digest = r.u64();
  const std::uint64_t body = r.u64();
  f.body.assign(bytes.substr(kHeaderSize, body));
  return f;
}

/// Decodes and checks kind and parameter digest.
inline Frame open_frame(std::string_view bytes, PayloadKind want, std::uint64_t digest) {
  Frame f = decode_frame(bytes);
  if (f.kind != want) {
    throw ProtocolDesync(std::string("expected ") + to_string(want) + ", got " + to_string(f.kind));
  }
  if (f.digest != digest) throw ParameterMismatch("frame was produced under different parameters");
  return f;
}

namespace wire {

inline void put_poly(ByteWriter& w, const RingPoly& p) {
  if (p.form() != PolyForm::ntt) throw ParameterMismatch("wire polynomials travel in NTT form");
  w.u32(static_cast<std::uint32_t>(p.residue_count()));
  w.words(p.data());
}

inline RingPoly get_poly(ByteReader& r, const BasisPtr& basis) {
  const std::uint32_t residues = r.u32();
  if (residues != basis->size()) throw ParameterMismatch("polynomial residue count does not match parameters");
  RingPoly p(basis, PolyForm::ntt);
  r.words(p.data());
  for (std::size_t i = 0; i < residues; ++i) {
    const std::uint64_t q = basis->modulus(i).value();
    for (auto v : p.residue(i)) {
      if (v >= q) throw ChecksumFail("residue out of range for its modulus");
    }
  }
  return p;
}

inline void put_ciphertext(ByteWriter& w, const Ciphertext& c) {
  w.u32(static_cast<std::uint32_t>(c.size()));
  for (const auto& p : c.parts) put_poly(w, p);
}

inline Ciphertext get_ciphertext(ByteReader& r, const SchemeParams& params) {
  const std::uint32_t parts = r.u32();
  if (parts < 2 || parts > 3) throw ProtocolDesync("ciphertext must have 2 or 3 parts");
  Ciphertext c;
  for (std::uint32_t j = 0; j < parts; ++j) c.parts.push_back(get_poly(r, params.q_basis()));
  return c;
}

inline void put_plaintext(ByteWriter& w, const Plaintext& m) { put_poly(w, ntt_transform(m.poly(), NttDirection::forward)); }

inline Plaintext get_plaintext(ByteReader& r, const SchemeParams& params) {
  return Plaintext(ntt_transform(get_poly(r, params.t_basis()), NttDirection::inverse));
}

inline void put_switch_key(ByteWriter& w, const KeySwitchKey& k) {
  w.u32(static_cast<std::uint32_t>(k.b.size()));
  for (std::size_t i = 0; i < k.b.size(); ++i) {
    put_poly(w, k.b[i]);
    put_poly(w, k.a[i]);
  }
}

inline KeySwitchKey get_switch_key(ByteReader& r, const SchemeParams& params) {
  const std::uint32_t digits = r.u32();
  if (digits != params.q_basis()->size()) throw ParameterMismatch("key-switching key digit count mismatch");
  KeySwitchKey k;
  for (std::uint32_t i = 0; i < digits; ++i) {
    k.b.push_back(get_poly(r, params.q_basis()));
    k.a.push_back(get_poly(r, params.q_basis()));
  }
  return k;
}

}  // namespace wire

// Typed encoders. Each returns one complete frame.

inline std::string serialize(const SchemeParams& params, const Ciphertext& c) {
  ByteWriter w;
  wire::put_ciphertext(w, c);
  return encode_frame(PayloadKind::ciphertext, params.digest(), w.bytes());
}

inline std::string serialize(const SchemeParams& params, const Plaintext& m) {
  ByteWriter w;
  wire::put_plaintext(w, m);
  return encode_frame(PayloadKind::plaintext, params.digest(), w.bytes());
}

inline std::string serialize(const SchemeParams& params, const PublicKey& pk) {
  ByteWriter w;
  wire::put_poly(w, pk.p0);
  wire::put_poly(w, pk.p1);
  return encode_frame(PayloadKind::public_key, params.digest(), w.bytes());
}

inline std::string serialize(const SchemeParams& params, const SecretKey& sk) {
  ByteWriter w;
  wire::put_poly(w, sk.s);
  return encode_frame(PayloadKind::secret_key, params.digest(), w.bytes());
}

inline std::string serialize(const SchemeParams& params, const RelinKey& rlk) {
  ByteWriter w;
  wire::put_switch_key(w, rlk.key);
  return encode_frame(PayloadKind::relin_key, params.digest(), w.bytes());
}

inline std::string serialize(const SchemeParams& params, const GaloisKeys& keys) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(keys.size()));
  for (const auto& [step, gk] : keys.by_step) {
    w.u64(step);
    w.u64(gk.element);
    wire::put_switch_key(w, gk.key);
  }
  return encode_frame(PayloadKind::galois_keys, params.digest(), w.bytes());
}

/// Packed and naive offline material in one frame.
struct DesignerBundle {
  OfflineBundle packed;
  Ciphertext naive_c_K;

  NaiveBundle naive(const SchemeParams& params) const {
    NaiveBundle b;
    b.n = packed.n;
    b.delta = packed.delta;
    b.c_K = naive_c_K;
    for (std::size_t j = 0; j < b.n; ++j) {
      b.weights.push_back(Plaintext::constant(params, static_cast<std::int64_t>(j) - static_cast<std::int64_t>(b.n / 2)));
    }
    return b;
  }
};

inline std::string serialize(const SchemeParams& params, const DesignerBundle& b) {
  ByteWriter w;
  w.u64(b.packed.n);
  w.f64(b.packed.delta);
  w.f64(b.packed.gain);
  w.i64(b.packed.k_quantized);
  wire::put_plaintext(w, b.packed.m_w);
  wire::put_ciphertext(w, b.packed.c_K);
  wire::put_ciphertext(w, b.naive_c_K);
  return encode_frame(PayloadKind::bundle, params.digest(), w.bytes());
}

/// Parameters travel with the explicit prime chain so the receiver does not
/// repeat prime generation; the digest is recomputed and checked.
inline std::string serialize_params(const SchemeParams& params) {
  ByteWriter w;
  w.str(params.name());
  w.u64(params.degree());
  w.u32(static_cast<std::uint32_t>(params.lambda()));
  w.f64(params.err_stddev());
  w.u64(params.t());
  const auto chain = params.q_chain();
  w.u32(static_cast<std::uint32_t>(chain.size()));
  for (auto q : chain) w.u64(q);
  return encode_frame(PayloadKind::params, params.digest(), w.bytes());
}

inline ParamsPtr deserialize_params(std::string_view bytes) {
  const Frame f = decode_frame(bytes);
  if (f.kind != PayloadKind::params) throw ProtocolDesync(std::string("expected parameters, got ") + to_string(f.kind));
  ByteReader r(f.body);
  ParamSpec spec;
  spec.name = std::string(r.str());
  spec.degree = r.u64();
  spec.lambda = static_cast<int>(r.u32());
  spec.err_stddev = r.f64();
  const std::uint64_t t = r.u64();
  spec.t = t;
  std::vector<std::uint64_t> chain(r.u32());
  for (auto& q : chain) q = r.u64();
  r.expect_end();
  for (auto q : chain) spec.q_bits.push_back(std::bit_width(q));
  auto params = std::make_shared<const SchemeParams>(spec, chain, t);
  if (params->digest() != f.digest) throw ChecksumFail("parameter digest does not match contents");
  return params;
}

template <class T>
T deserialize(const SchemeParams& params, std::string_view bytes);

template <>
inline Ciphertext deserialize<Ciphertext>(const SchemeParams& params, std::string_view bytes) {
  const Frame f = open_frame(bytes, PayloadKind::ciphertext, params.digest());
  ByteReader r(f.body);
  Ciphertext c = wire::get_ciphertext(r, params);
  r.expect_end();
  return c;
}

template <>
inline Plaintext deserialize<Plaintext>(const SchemeParams& params, std::string_view bytes) {
  const Frame f = open_frame(bytes, PayloadKind::plaintext, params.digest());
  ByteReader r(f.body);
  Plaintext m = wire::get_plaintext(r, params);
  r.expect_end();
  return m;
}

template <>
inline PublicKey deserialize<PublicKey>(const SchemeParams& params, std::string_view bytes) {
  const Frame f = open_frame(bytes, PayloadKind::public_key, params.digest());
  ByteReader r(f.body);
  PublicKey pk{wire::get_poly(r, params.q_basis()), wire::get_poly(r, params.q_basis())};
  r.expect_end();
  return pk;
}

template <>
inline SecretKey deserialize<SecretKey>(const SchemeParams& params, std::string_view bytes) {
  const Frame f = open_frame(bytes, PayloadKind::secret_key, params.digest());
  ByteReader r(f.body);
  SecretKey sk;
  sk.s = wire::get_poly(r, params.q_basis());
  r.expect_end();
  const RingPoly coeffs = ntt_transform(sk.s, NttDirection::inverse);
  sk.coeffs.resize(params.degree());
  for (std::size_t k = 0; k < sk.coeffs.size(); ++k) sk.coeffs[k] = coeffs.centered(0, k);
  return sk;
}

template <>
inline RelinKey deserialize<RelinKey>(const SchemeParams& params, std::string_view bytes) {
  const Frame f = open_frame(bytes, PayloadKind::relin_key, params.digest());
  ByteReader r(f.body);
  RelinKey k{wire::get_switch_key(r, params)};
  r.expect_end();
  return k;
}

template <>
inline GaloisKeys deserialize<GaloisKeys>(const SchemeParams& params, std::string_view bytes) {
  const Frame f = open_frame(bytes, PayloadKind::galois_keys, params.digest());
  ByteReader r(f.body);
  GaloisKeys keys;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t step = r.u64();
    GaloisKey gk;
    gk.element = r.u64();
    if (step == 0 || step >= params.slot_count() || gk.element != galois_element(step, params.degree())) {
      throw ProtocolDesync("Galois key header is inconsistent");
    }
    gk.permutation = galois_permutation(params.q_basis()->ntt(0), gk.element);
    gk.key = wire::get_switch_key(r, params);
    keys.by_step.emplace(step, std::move(gk));
  }
  r.expect_end();
  return keys;
}

template <>
inline DesignerBundle deserialize<DesignerBundle>(const SchemeParams& params, std::string_view bytes) {
  const Frame f = open_frame(bytes, PayloadKind::bundle, params.digest());
  ByteReader r(f.body);
  DesignerBundle b;
  b.packed.n = r.u64();
  b.packed.delta = r.f64();
  b.packed.gain = r.f64();
  b.packed.k_quantized = r.i64();
  b.packed.m_w = wire::get_plaintext(r, params);
  b.packed.c_K = wire::get_ciphertext(r, params);
  b.naive_c_K = wire::get_ciphertext(r, params);
  r.expect_end();
  if (b.packed.n == 0 || b.packed.n > params.slot_count()) throw ImageTooWide("bundle pixel count out of range");
  return b;
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to " + path + " failed");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace evfc
