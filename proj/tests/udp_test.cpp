#include <gtest/gtest.h>

#include "splitbox/fabric.hpp"
#include "splitbox/firewall.hpp"
#include "splitbox/udp.hpp"

using namespace splitbox;

namespace {

struct Setup {
  PolicyTree tree{firewall::kHeaderBits};
  SetupBundle bundle;
  std::vector<Packet> packets;
};

Setup make_setup(std::size_t count, std::uint32_t t, double rho = 1.0) {
  Setup s;
  auto rng = RandomSource::seeded(40 + t);
  firewall::TraceSpec spec;
  spec.count = count;
  spec.sources = 16;
  spec.destinations = 8;
  auto trace = firewall::generate_trace(spec, rng);
  auto rules = firewall::random_ruleset(30, trace, rng);
  s.tree = firewall::compile_rules(rules);
  ProtocolParams p;
  p.l = 128;
  p.t = t;
  if (rho < 1.0) set_rho(p, rho);
  s.bundle = global_setup(p, s.tree, rng);
  s.packets = firewall::to_packets(trace);
  return s;
}

}  // namespace

TEST(Address, Parse) {
  auto a = udp::Address::parse("127.0.0.1:9000");
  EXPECT_EQ(a.host, "127.0.0.1");
  EXPECT_EQ(a.port, 9000);
  EXPECT_EQ(udp::Address::parse(":7").host, "127.0.0.1");
  EXPECT_EQ(udp::Address::parse("localhost:1").to_string(), "localhost:1");
  EXPECT_THROW(udp::Address::parse("nocolon"), ConfigError);
  EXPECT_THROW(udp::Address::parse("h:70000"), ConfigError);
  EXPECT_THROW(udp::Address::parse("h:"), ConfigError);
  EXPECT_THROW(udp::Address::parse("h:1x"), ConfigError);
}

TEST(Socket, LoopbackDatagram) {
  udp::Socket a({"127.0.0.1", 0}), b({"127.0.0.1", 0});
  const std::vector<std::uint8_t> msg{1, 2, 3, 4};
  a.send_to(b.local().resolve(), msg);
  auto got = b.receive(1000);
  ASSERT_TRUE(got);
  EXPECT_EQ(*got, msg);
  EXPECT_FALSE(b.receive(10));
  EXPECT_THROW(udp::Socket(b.local()), udp::SocketError);  // port in use
}

TEST(Loopback, VerdictsMatchInProcessCarrier) {
  for (std::uint32_t t : {2u, 3u}) {
    auto s = make_setup(1000, t);
    auto sim = fabric::run_topology(fabric::Topology{}, s.bundle, s.packets);
    auto net = udp::run_loopback(s.bundle, s.packets);
    ASSERT_EQ(net.packets.size(), 1000u);
    EXPECT_EQ(net.stat("client.forwarded") + net.stat("client.dropped"), 1000u);
    for (std::size_t k = 0; k < s.packets.size(); ++k) {
      ASSERT_EQ(net.packets[k].outcome, sim.packets[k].outcome) << k;
      EXPECT_EQ(net.packets[k].output, sim.packets[k].output) << k;
      EXPECT_GE(net.packets[k].exit_ns, net.packets[k].entry_ns);
    }
  }
}

TEST(Loopback, DummiesAndWorkers) {
  auto s = make_setup(500, 2, 0.5);
  udp::LoopbackOptions opts;
  opts.workers = 2;
  auto net = udp::run_loopback(s.bundle, s.packets, opts);
  EXPECT_EQ(net.stat("client.forwarded") + net.stat("client.dropped"), 500u);
  EXPECT_EQ(net.stat("client.dummies_discarded"), net.stat("entry.dummies"));
  for (std::size_t k = 0; k < s.packets.size(); ++k) {
    const Packet want = traverse(s.tree, s.packets[k]);
    if (want.header.is_zero()) {
      EXPECT_EQ(net.packets[k].outcome, fabric::Outcome::dropped);
    } else {
      EXPECT_EQ(net.packets[k].output, std::optional<Packet>(want));
    }
  }
}

TEST(Servers, IdleTimeoutEndsProcessor) {
  auto s = make_setup(10, 2);
  ProcessorState proc(s.bundle.processors[0]);
  udp::Socket sock({"127.0.0.1", 0});
  const auto start = std::chrono::steady_clock::now();
  udp::serve_processor(proc, sock, {"127.0.0.1", 9}, udp::ServeOptions{50, nullptr});
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(2));
}

TEST(Servers, EntryRejectsWrongPeerCount) {
  auto s = make_setup(10, 2);
  EntryState entry(s.bundle.entry, RandomSource::seeded(1));
  udp::Socket sock({"127.0.0.1", 0});
  udp::EntryPeers peers;
  peers.processors.push_back({"127.0.0.1", 9});
  EXPECT_THROW(udp::serve_entry(entry, sock, peers, s.packets, 0), ConfigError);
}
