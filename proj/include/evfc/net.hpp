#pragma once

// Blocking TCP transport over POSIX sockets. Frames from serialize.hpp are
// self-delimiting, so a message is exactly one frame on the stream.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "evfc/serialize.hpp"

namespace evfc {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Endpoint parse(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) throw OutOfRange("address '" + text + "' is not host:port");
    Endpoint e;
    e.host = text.substr(0, colon);
    if (e.host.empty()) e.host = "127.0.0.1";
    const unsigned long port = std::stoul(text.substr(colon + 1));
    if (port > 65535) throw OutOfRange("port out of range in '" + text + "'");
    e.port = static_cast<std::uint16_t>(port);
    return e;
  }
  std::string str() const { return host + ":" + std::to_string(port); }
};

inline sockaddr_in resolve(const Endpoint& e) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(e.port);
  if (inet_pton(AF_INET, e.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw PeerUnavailable("cannot resolve host '" + e.host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void close() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  void set_receive_timeout(std::chrono::milliseconds timeout) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }

  void send_all(std::string_view bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw PeerUnavailable(std::string("send failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string recv_exact(std::size_t count) {
    std::string out(count, '\0');
    std::size_t got = 0;
    while (got < count) {
      const ssize_t n = ::recv(fd_, out.data() + got, count - got, 0);
      if (n == 0) throw PeerUnavailable("peer closed the connection");
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) throw PeerUnavailable("timed out waiting for peer");
        throw PeerUnavailable(std::string("recv failed: ") + std::strerror(errno));
      }
      got += static_cast<std::size_t>(n);
    }
    return out;
  }

  void send_frame(std::string_view frame) { send_all(frame); }

  std::string recv_frame() {
    std::string frame = recv_exact(kHeaderSize);
    const std::uint64_t total = frame_size_from_header(frame);
    frame += recv_exact(static_cast<std::size_t>(total - kHeaderSize));
    return frame;
  }

 private:
  int fd_ = -1;
};

class Listener {
 public:
  explicit Listener(const Endpoint& at) {
    sock_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!sock_.valid()) throw PeerUnavailable(std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = resolve(at);
    if (::bind(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      throw PeerUnavailable("cannot bind " + at.str() + ": " + std::strerror(errno));
    }
    if (::listen(sock_.fd(), 8) != 0) throw PeerUnavailable(std::string("listen: ") + std::strerror(errno));
    socklen_t len = sizeof addr;
    getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    bound_ = at;
    bound_.port = ntohs(addr.sin_port);
  }

  /// The actual endpoint, with the port filled in when 0 was requested.
  const Endpoint& endpoint() const noexcept { return bound_; }

  Socket accept(std::chrono::milliseconds timeout) {
    pollfd p{sock_.fd(), POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (ready <= 0) throw PeerUnavailable("no peer connected to " + bound_.str() + " within timeout");
    Socket s(::accept(sock_.fd(), nullptr, nullptr));
    if (!s.valid()) throw PeerUnavailable(std::string("accept: ") + std::strerror(errno));
    const int one = 1;
    setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
  }

 private:
  Socket sock_;
  Endpoint bound_;
};

/// Connects, retrying until `deadline` elapses (peers may start in any order).
inline Socket connect_with_retry(const Endpoint& to, std::chrono::milliseconds deadline) {
  const auto stop = std::chrono::steady_clock::now() + deadline;
  const sockaddr_in addr = resolve(to);
  for (;;) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw PeerUnavailable(std::string("socket: ") + std::strerror(errno));
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
      const int one = 1;
      setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return s;
    }
    if (std::chrono::steady_clock::now() >= stop) {
      throw PeerUnavailable("cannot reach " + to.str() + ": " + std::strerror(errno));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

enum class MessageTag : std::uint8_t { hello = 1, state = 2, frame = 3, result = 4, bye = 5 };

inline const char* to_string(MessageTag t) {
  switch (t) {
    case MessageTag::hello: return "hello";
    case MessageTag::state: return "state";
    case MessageTag::frame: return "frame";
    case MessageTag::result: return "result";
    case MessageTag::bye: return "bye";
  }
  return "unknown";
}

enum class RoleId : std::uint8_t { camera = 1, server = 2, actuator = 3 };

/// One protocol message: tag, frame counter, scalar fields, nested frames.
struct Message {
  MessageTag tag = MessageTag::hello;
  std::uint64_t counter = 0;
  std::vector<double> scalars;
  std::vector<std::string> items;
};

inline std::string encode_message(const Message& m, std::uint64_t digest) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(m.tag));
  w.u64(m.counter);
  w.u32(static_cast<std::uint32_t>(m.scalars.size()));
  for (double v : m.scalars) w.f64(v);
  w.u32(static_cast<std::uint32_t>(m.items.size()));
  for (const auto& it : m.items) w.str(it);
  return encode_frame(PayloadKind::control, digest, w.bytes());
}

inline Message decode_message(std::string_view frame, std::uint64_t digest) {
  const Frame f = open_frame(frame, PayloadKind::control, digest);
  ByteReader r(f.body);
  Message m;
  m.tag = static_cast<MessageTag>(r.u8());
  m.counter = r.u64();
  m.scalars.resize(r.u32());
  for (auto& v : m.scalars) v = r.f64();
  const std::uint32_t items = r.u32();
  for (std::uint32_t i = 0; i < items; ++i) m.items.emplace_back(r.str());
  r.expect_end();
  return m;
}

/// Message stream bound to one parameter set.
class Channel {
 public:
  Channel() = default;
  Channel(Socket sock, std::uint64_t digest, std::chrono::milliseconds timeout)
      : sock_(std::move(sock)), digest_(digest) {
    sock_.set_receive_timeout(timeout);
  }

  void send(const Message& m) { sock_.send_frame(encode_message(m, digest_)); }

  Message receive() { return decode_message(sock_.recv_frame(), digest_); }

  /// Receives and checks tag and frame counter.
  Message expect(MessageTag tag, std::uint64_t counter) {
    Message m = receive();
    if (m.tag != tag || m.counter != counter) {
      throw ProtocolDesync(std::string("expected ") + to_string(tag) + " #" + std::to_string(counter) + ", got " +
                           to_string(m.tag) + " #" + std::to_string(m.counter));
    }
    return m;
  }

  void hello(RoleId me) { send({MessageTag::hello, 0, {static_cast<double>(me)}, {}}); }

  RoleId expect_hello() {
    const Message m = expect(MessageTag::hello, 0);
    if (m.scalars.size() != 1) throw ProtocolDesync("malformed hello");
    const int role = static_cast<int>(m.scalars[0]);
    if (role < 1 || role > 3) throw ProtocolDesync("unknown peer role in hello");
    return static_cast<RoleId>(role);
  }

  void close() noexcept { sock_.close(); }

 private:
  Socket sock_;
  std::uint64_t digest_ = 0;
};

}  // namespace evfc
