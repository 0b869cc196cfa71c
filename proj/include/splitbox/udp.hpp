#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "splitbox/error.hpp"
#include "splitbox/fabric.hpp"
#include "splitbox/roles.hpp"
#include "splitbox/wire.hpp"

// UDP carrier: one datagram per wire message. Best effort, wall clock.
namespace splitbox::udp {

class SocketError : public Error {
 public:
  explicit SocketError(const std::string& what) : Error(what + ": " + std::strerror(errno)) {}
};

struct Address {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  // "host:port"; an empty host means loopback.
  static Address parse(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) throw ConfigError("address '" + text + "' is not host:port");
    Address a;
    if (colon > 0) a.host = text.substr(0, colon);
    const std::string port = text.substr(colon + 1);
    char* end = nullptr;
    const unsigned long v = std::strtoul(port.c_str(), &end, 10);
    if (port.empty() || *end != '\0' || v > 65535) throw ConfigError("bad port in '" + text + "'");
    a.port = static_cast<std::uint16_t>(v);
    return a;
  }

  std::string to_string() const { return host + ":" + std::to_string(port); }

  sockaddr_in resolve() const {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &sa.sin_addr) == 1) return sa;
    addrinfo hints{}, *res = nullptr;
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_DGRAM;
    if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res) throw ConfigError("cannot resolve " + host);
    sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    freeaddrinfo(res);
    return sa;
  }
};

inline constexpr std::size_t kMaxDatagram = 65507;

class Socket {
 public:
  explicit Socket(const Address& bind_to, int rcvbuf = 8 << 20) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw SocketError("socket");
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof rcvbuf);
    ::setsockopt(fd_, SOL_SOCKET, SO_SNDBUF, &rcvbuf, sizeof rcvbuf);
    const sockaddr_in sa = bind_to.resolve();
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) {
      ::close(fd_);
      throw SocketError("bind " + bind_to.to_string());
    }
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  ~Socket() {
    if (fd_ >= 0) ::close(fd_);
  }

  Address local() const {
    sockaddr_in sa{};
    socklen_t len = sizeof sa;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len);
    char buf[INET_ADDRSTRLEN];
    ::inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof buf);
    return {buf, ntohs(sa.sin_port)};
  }

  void send_to(const sockaddr_in& to, std::span<const std::uint8_t> bytes) const {
    for (;;) {
      const auto n = ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&to), sizeof to);
      if (n >= 0) return;
      if (errno == EINTR) continue;
      if (errno == ENOBUFS || errno == EAGAIN) {
        std::this_thread::yield();
        continue;
      }
      throw SocketError("sendto");
    }
  }

  // Waits up to timeout_ms for one datagram.
  std::optional<std::vector<std::uint8_t>> receive(int timeout_ms) const {
    pollfd p{fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, timeout_ms);
    if (r < 0 && errno != EINTR) throw SocketError("poll");
    if (r <= 0) return std::nullopt;
    std::vector<std::uint8_t> buf(kMaxDatagram);
    const auto n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) return std::nullopt;
      throw SocketError("recv");
    }
    buf.resize(static_cast<std::size_t>(n));
    return buf;
  }

 private:
  int fd_ = -1;
};

inline TimeNs wall_ns() {
  return static_cast<TimeNs>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch()).count());
}

// ---------------------------------------------------------------------------
// Role servers. Each returns when `stop` is set or after idle_ms without
// traffic (idle_ms == 0 waits for `stop` only).

struct ServeOptions {
  int idle_ms = 0;
  const std::atomic<bool>* stop = nullptr;
};

namespace detail {

inline bool should_stop(const ServeOptions& o, TimeNs last_activity) {
  if (o.stop && o.stop->load()) return true;
  return o.idle_ms > 0 && wall_ns() - last_activity > static_cast<TimeNs>(o.idle_ms) * 1'000'000;
}

}  // namespace detail

// Decodes TO_PROCESSOR datagrams and forwards the shares to the client.
inline void serve_processor(const ProcessorState& proc, const Socket& sock, const Address& client,
                            const ServeOptions& opts = {}) {
  const sockaddr_in to = client.resolve();
  TimeNs last = wall_ns();
  while (!detail::should_stop(opts, last)) {
    auto dgram = sock.receive(20);
    if (!dgram) continue;
    last = wall_ns();
    if (auto out = proc.handle(std::span<const std::uint8_t>(*dgram))) sock.send_to(to, encode(*out));
  }
}

struct ClientEvent {
  Verdict verdict;
  TimeNs at_ns = 0;
};

// Reassembles verdicts; on_verdict runs on the serving thread.
inline void serve_client(ClientState& client, const Socket& sock, const std::function<void(const ClientEvent&)>& on_verdict,
                         const ServeOptions& opts = {}, const std::function<bool()>& done = {}) {
  const TimeNs start = wall_ns();
  TimeNs last = start;
  while (!detail::should_stop(opts, last) && !(done && done())) {
    auto dgram = sock.receive(20);
    const TimeNs now = wall_ns();
    client.expire(now - start);
    if (!dgram) continue;
    last = now;
    if (auto v = client.handle(std::span<const std::uint8_t>(*dgram), now - start)) on_verdict({std::move(*v), now});
  }
  client.flush();
}

struct EntryPeers {
  std::vector<Address> processors;  // index j is processor j+1
  Address client;
};

// Ingests the packets at a fixed wall-clock rate (0: as fast as possible).
// on_ingest receives the input index, real seq and entry timestamp.
inline void serve_entry(EntryState& entry, const Socket& sock, const EntryPeers& peers, std::span<const Packet> packets,
                        double rate_pps,
                        const std::function<void(std::size_t, std::uint64_t, TimeNs)>& on_ingest = {}) {
  if (peers.processors.size() != entry.params().t) throw ConfigError("entry needs exactly t processor peers");
  std::vector<sockaddr_in> procs;
  for (const auto& a : peers.processors) procs.push_back(a.resolve());
  const sockaddr_in client = peers.client.resolve();
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t k = 0; k < packets.size(); ++k) {
    if (rate_pps > 0) {
      std::this_thread::sleep_until(start + std::chrono::nanoseconds(static_cast<std::int64_t>(1e9 * static_cast<double>(k) / rate_pps)));
    }
    const TimeNs now = wall_ns();
    IngestResult res = entry.ingest(packets[k]);
    if (on_ingest) on_ingest(k, res.real_seq, now);
    for (const auto& om : res.messages) {
      const auto bytes = encode(om.msg);
      sock.send_to(om.to.kind == Destination::Kind::client ? client : procs[om.to.processor - 1], bytes);
    }
  }
}

// ---------------------------------------------------------------------------
// Loopback topology: every role on its own thread and socket.

struct LoopbackOptions {
  double rate_pps = 20'000;
  int drain_ms = 2'000;  // how long to wait for stragglers after the last send
  std::uint32_t workers = 1;  // threads per processor, sharing one socket
  ClientOptions client;
  std::uint64_t entry_seed = 1;
};

inline fabric::RunReport run_loopback(const SetupBundle& bundle, std::span<const Packet> packets,
                                      const LoopbackOptions& opts = {}) {
  const ProtocolParams& params = bundle.entry.params;
  if (bundle.processors.size() != params.t || bundle.client.params != params) {
    throw ConfigError("role configurations disagree on parameters");
  }
  const Address lo{"127.0.0.1", 0};
  Socket entry_sock(lo), client_sock(lo);
  std::vector<Socket> proc_socks;
  std::vector<std::unique_ptr<ProcessorState>> procs;
  EntryPeers peers;
  peers.client = client_sock.local();
  for (const auto& pc : bundle.processors) {
    proc_socks.emplace_back(lo);
    peers.processors.push_back(proc_socks.back().local());
    procs.push_back(std::make_unique<ProcessorState>(pc));
  }

  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> real_sent{0};
  ClientState client(bundle.client, opts.client);
  std::vector<ClientEvent> events;
  std::atomic<std::uint64_t> settled{0};

  std::vector<std::thread> threads;
  for (std::size_t j = 0; j < procs.size(); ++j) {
    for (std::uint32_t w = 0; w < std::max<std::uint32_t>(1, opts.workers); ++w) {
      threads.emplace_back([&, j] { serve_processor(*procs[j], proc_socks[j], peers.client, ServeOptions{0, &stop}); });
    }
  }
  std::thread client_thread([&] {
    serve_client(
        client, client_sock,
        [&](const ClientEvent& e) {
          events.push_back(e);
          ++settled;
        },
        ServeOptions{0, &stop});
  });

  fabric::RunReport report;
  report.packets.resize(packets.size());
  std::unordered_map<std::uint64_t, std::size_t> seq_to_index;
  EntryState entry(bundle.entry, RandomSource::seeded(opts.entry_seed));
  serve_entry(entry, entry_sock, peers, packets, opts.rate_pps, [&](std::size_t k, std::uint64_t seq, TimeNs now) {
    seq_to_index[seq] = k;
    report.packets[k].seq = seq;
    report.packets[k].entry_ns = now;
    ++real_sent;
  });

  // Wait until every real packet has a verdict or the drain window passes.
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(opts.drain_ms);
  while (std::chrono::steady_clock::now() < deadline) {
    if (settled.load() >= real_sent.load()) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  stop = true;
  client_thread.join();
  for (auto& th : threads) th.join();

  for (auto& e : events) {
    auto it = seq_to_index.find(e.verdict.seq);
    if (it == seq_to_index.end()) continue;
    auto& rec = report.packets[it->second];
    rec.outcome = e.verdict.kind == VerdictKind::forwarded ? fabric::Outcome::forwarded : fabric::Outcome::dropped;
    rec.exit_ns = e.at_ns;
    rec.output = std::move(e.verdict.packet);
  }
  for (const auto& [k, v] : entry.stats().snapshot()) report.stats[k] = v;
  for (const auto& p : procs) {
    for (const auto& [k, v] : p->stats()) report.stats[k] = v;
  }
  for (const auto& [k, v] : client.stats().snapshot()) report.stats[k] = v;
  const std::uint64_t finalized = client.stats().finalized();
  report.stats["fabric.unseen"] = entry.stats().emitted >= finalized ? entry.stats().emitted - finalized : 0;
  if (!report.packets.empty()) {
    report.first_ns = report.packets.front().entry_ns;
    report.last_ns = wall_ns();
  }
  return report;
}

}  // namespace splitbox::udp
