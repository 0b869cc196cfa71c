#include <gtest/gtest.h>

#include "splitbox/hash.hpp"
#include "splitbox/protocol.hpp"
#include "support.hpp"

using namespace splitbox;

namespace {

BitString B(const char* s) { return BitString::from_text(s); }
TriStateString T(const char* s) { return TriStateString::from_text(s); }

ProtocolParams small_params(std::uint32_t n, std::uint32_t l, std::uint32_t t = 2, std::uint32_t delta = 1) {
  ProtocolParams p;
  p.n = n;
  p.l = l;
  p.t = t;
  p.delta_min = delta;
  return p;
}

// Plain-text merge for a whole run: the private path must always agree.
Packet private_eval(const SetupBundle& b, const Packet& x, CounterIndex i) {
  const auto sp = split_packet(x, i, b.entry.blinds);
  std::vector<TraversalShares> shares;
  for (const auto& pc : b.processors) shares.push_back(private_traversal(pc, sp.reader, i));
  return merge_shares(i, sp.writer, shares, b.client.blinds, b.entry.params.t).packet;
}

}  // namespace

TEST(Hash, KnownDigests) {
  // SHA-1 and SHA-256 of the single byte 0x00 (a 1..8-bit string of zeros).
  const MatchHasher sha1(160), sha256(256);
  EXPECT_EQ(to_hex(sha1.hash(BitString(3))), "5ba93c9db0cff93f52b521d7420e43f6eda2784f");
  EXPECT_EQ(to_hex(sha256.hash(BitString(8))), "6e340b9cffb37a989ca544e6bb780a2c78901d3fb33738768511a30617afa01d");
  EXPECT_THROW(MatchHasher(128), ConfigError);
}

TEST(Params, Validation) {
  ProtocolParams p;
  EXPECT_NO_THROW(p.validate());
  p.t = 1;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.l = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  EXPECT_THROW(set_rho(p, 0.0), ConfigError);
  set_rho(p, 0.5);
  EXPECT_DOUBLE_EQ(p.rho(), 0.5);
}

TEST(Setup, HandComputedSingleEntry) {
  // l=1, mu = 1*, blind s_1 = 01. The blinded match is embed(mu) xor
  // mask(10, 01) = 10 xor 00 = 10, so the entry is H(10).
  auto params = small_params(2, 1);
  HashedMatchTable table(1, 1, 160);
  const BitString s1 = B("01");
  const auto mu = T("1*");
  const BitString blinded = mu.value() ^ mask(mu.care(), s1);
  EXPECT_EQ(blinded, B("10"));
  const MatchHasher h(160);
  auto expected = h.hash(blinded);

  // Find a seed whose first blind is 01 to drive the real setup function.
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto rng = RandomSource::seeded(seed);
    if (rng.bits(2) != s1) continue;
    auto rng2 = RandomSource::seeded(seed);
    const std::vector<TriStateString> matches{mu};
    auto tables = setup_lookup_tables(params, matches, rng2, {true});
    ASSERT_EQ(tables.blinds.at(CounterIndex{1}), s1);
    auto got = tables.hashed.digest(CounterIndex{1}, 0);
    EXPECT_TRUE(std::equal(got.begin(), got.end(), expected.begin(), expected.end()));
    return;
  }
  FAIL() << "no seed produced the blind 01";
}

TEST(Setup, SizesAndDeterminism) {
  auto params = small_params(16, 64);
  const std::vector<TriStateString> matches{T("1111****11110000"), T("0000000000000***")};
  auto a = RandomSource::seeded(7), b = RandomSource::seeded(7);
  auto ta = setup_lookup_tables(params, matches, a);
  auto tb = setup_lookup_tables(params, matches, b);
  EXPECT_EQ(ta.blinds.size(), 64u);
  EXPECT_EQ(ta.hashed.raw().size(), 64u * 2 * 20);
  EXPECT_EQ(ta.blinds, tb.blinds);
  EXPECT_EQ(ta.hashed, tb.hashed);
}

TEST(Setup, WeakMatchesRefusedUnlessAllowed) {
  auto params = small_params(16, 4, 2, 16);
  const std::vector<TriStateString> weak{T("1111111111111111"), T("1***************")};
  auto rng = RandomSource::seeded(1);
  try {
    setup_lookup_tables(params, weak, rng);
    FAIL();
  } catch (const WeakMatchError& e) {
    EXPECT_EQ(e.match_index(), 1u);
    EXPECT_EQ(e.weight(), 1u);
  }
  EXPECT_NO_THROW(setup_lookup_tables(params, weak, rng, {true}));
}

TEST(HideMatch, IsProjection) {
  EXPECT_EQ(hide_match(T("10**")), B("1100"));
  EXPECT_EQ(hide_match(T("****")), B("0000"));
}

TEST(Shares, HandExamples) {
  auto rng = RandomSource::seeded(3);
  for (std::uint32_t t = 2; t <= 5; ++t) {
    auto sh = split_action(T("****"), t, rng);
    BitString beta(4);
    for (const auto& s : sh) beta ^= s.beta;
    EXPECT_EQ(beta, B("0000"));
  }
  // t=2, drop action: the second alpha share must equal the first.
  auto sh = split_action(T("0000"), 2, rng);
  EXPECT_EQ(sh[0].alpha, sh[1].alpha);
  BitString beta = sh[0].beta ^ sh[1].beta;
  EXPECT_EQ(beta, B("1111"));
}

TEST(Shares, ReconstructionProperty) {
  auto rng = RandomSource::seeded(4);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = rng.uniform(1, 40);
    const auto t = static_cast<std::uint32_t>(rng.uniform(2, 5));
    const auto alpha = gen::random_tristate(rng, n);
    auto sh = split_action(alpha, t, rng, 9);
    ASSERT_EQ(sh.size(), t);
    BitString a(n), b(n);
    for (std::uint32_t j = 0; j < t; ++j) {
      EXPECT_EQ(sh[j].processor, j + 1);
      EXPECT_EQ(sh[j].action, 9u);
      a ^= sh[j].alpha;
      b ^= sh[j].beta;
    }
    ASSERT_EQ(a, mask(alpha.care(), alpha.value()));
    ASSERT_EQ(b, alpha.care());
  }
}

TEST(Shares, CumulativeAlgebra) {
  auto rng = RandomSource::seeded(5);
  auto s1 = split_action(T("1*0*"), 2, rng)[0];
  auto s2 = split_action(T("**11"), 2, rng)[0];
  auto zero = CumulativeShares::zero(4);
  EXPECT_EQ(compute_action(compute_action(zero, s1), s1), zero);
  EXPECT_EQ(compute_action(compute_action(zero, s1), s2), compute_action(compute_action(zero, s2), s1));
}

TEST(SplitPacket, Algebra) {
  BlindTable zero(4, {BitString(4)});
  Packet x{B("1011"), {1, 2, 3}, 0};
  auto sp = split_packet(x, CounterIndex{1}, zero);
  EXPECT_EQ(sp.reader, x.header);
  EXPECT_EQ(sp.writer.payload, x.payload);

  auto rng = RandomSource::seeded(6);
  BlindTable blinds(8, {rng.bits(8), rng.bits(8)});
  for (int k = 0; k < 200; ++k) {
    auto a = gen::random_packet(rng, 8), b = gen::random_packet(rng, 8);
    auto sa = split_packet(a, CounterIndex{2}, blinds), sb = split_packet(b, CounterIndex{2}, blinds);
    EXPECT_EQ(sa.reader ^ blinds.at(CounterIndex{2}), a.header);
    EXPECT_EQ(sa.reader ^ sb.reader, a.header ^ b.header);
    EXPECT_EQ(sa.writer.header, sa.reader);
  }
  EXPECT_THROW(blinds.at(CounterIndex{3}), ContractViolation);
  EXPECT_THROW(blinds.at(CounterIndex{0}), ContractViolation);
}

TEST(ComputeMatch, AgreesWithTriMatchAtFullWidth) {
  auto rng = RandomSource::seeded(7);
  auto params = small_params(104, 16, 2, 8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TriStateString> matches;
    for (int j = 0; j < 5; ++j) matches.push_back(gen::random_match(rng, 104, 8, 0.8));
    auto tables = setup_lookup_tables(params, matches, rng);
    for (int k = 0; k < 10; ++k) {
      const auto j = static_cast<MatchId>(rng.uniform(0, matches.size() - 1));
      const CounterIndex i{static_cast<std::uint32_t>(rng.uniform(1, params.l))};
      const Packet x = rng.bit() ? gen::matching_packet(rng, matches[j]) : gen::random_packet(rng, 104, 0);
      const auto xr = split_packet(x, i, tables.blinds).reader;
      ASSERT_EQ(compute_match(xr, i, j, tables.hashed, hide_match(matches[j])), tri_match(x.header, matches[j]));
    }
  }
}

TEST(ComputeMatch, AllStarMatchAlwaysTrue) {
  auto rng = RandomSource::seeded(8);
  auto params = small_params(8, 4, 2, 0);
  const std::vector<TriStateString> m{T("********")};
  auto tables = setup_lookup_tables(params, m, rng, {true});
  for (int k = 0; k < 100; ++k) {
    EXPECT_TRUE(compute_match(rng.bits(8), CounterIndex{static_cast<std::uint32_t>(rng.uniform(1, 4))}, 0, tables.hashed,
                              hide_match(m[0])));
  }
}

TEST(GlobalSetup, RolePackaging) {
  auto rng = RandomSource::seeded(9);
  auto params = small_params(16, 8, 2, 4);
  auto tree = gen::random_chain(rng, 16, 5, 4);
  auto b = global_setup(params, tree, rng);
  ASSERT_EQ(b.processors.size(), 2u);
  EXPECT_EQ(b.processors[0].tree, b.processors[1].tree);
  EXPECT_EQ(b.processors[0].table, b.processors[1].table);
  EXPECT_EQ(b.processors[0].id, 1);
  EXPECT_EQ(b.processors[1].id, 2);
  EXPECT_EQ(b.entry.blinds, b.client.blinds);
  EXPECT_EQ(b.client.seed, std::optional<std::uint64_t>(9));
  EXPECT_EQ(b.processors[0].tree.nodes.size(), tree.size());

  auto params3 = params;
  params3.t = 3;
  EXPECT_EQ(global_setup(params3, tree, rng).processors.size(), 3u);
}

TEST(GlobalSetup, RejectsInvalidTreesAndWidth) {
  auto rng = RandomSource::seeded(10);
  PolicyTree bad(4);
  bad.set_action(0, T("1***"));
  EXPECT_THROW(global_setup(small_params(4, 2), bad, rng), InvalidTreeError);
  EXPECT_THROW(global_setup(small_params(5, 2), PolicyTree(4), rng), ConfigError);
}

TEST(GlobalSetup, IdentityOnlyTree) {
  auto rng = RandomSource::seeded(11);
  auto b = global_setup(small_params(8, 4), PolicyTree(8), rng);
  EXPECT_EQ(b.entry.blinds.size(), 4u);
  EXPECT_EQ(b.processors[0].table.match_count(), 0u);
  Packet x{B("10110011"), {}, 0};
  EXPECT_EQ(private_eval(b, x, CounterIndex{3}), x);
}

TEST(PrivateTraversal, SameCumulativePathAcrossProcessors) {
  auto rng = RandomSource::seeded(12);
  auto params = small_params(16, 8, 3, 4);
  auto tree = gen::random_tree(rng, 16, 8, 4);
  auto b = global_setup(params, tree, rng);
  for (int k = 0; k < 200; ++k) {
    const CounterIndex i{static_cast<std::uint32_t>(rng.uniform(1, 8))};
    const auto x = gen::random_packet(rng, 16);
    const auto sp = split_packet(x, i, b.entry.blinds);
    const auto expect = traverse_detailed(tree, x);
    for (const auto& pc : b.processors) {
      EXPECT_EQ(private_traversal(pc, sp.reader, i).match_evaluations, expect.match_attempts);
    }
  }
}

TEST(PrivateTraversal, NonMatchingSinglePolicyUsesRootSharesOnly) {
  auto rng = RandomSource::seeded(13);
  auto tree = build_chain({{T("1111****"), T("00000000")}});
  auto b = global_setup(small_params(8, 2, 2, 4), tree, rng);
  Packet x{B("00001111"), {}, 0};
  const auto sp = split_packet(x, CounterIndex{1}, b.entry.blinds);
  for (const auto& pc : b.processors) {
    auto res = private_traversal(pc, sp.reader, CounterIndex{1});
    // Root and its left child share the identity action id 0.
    auto expect = compute_action(compute_action(CumulativeShares::zero(8), pc.shares[0]), pc.shares[0]);
    EXPECT_EQ(res.cum, expect);
  }
}

TEST(Merge, EqualsPlaintextOnRandomTrees) {
  auto rng = RandomSource::seeded(14);
  for (int trial = 0; trial < 60; ++trial) {
    const auto t = static_cast<std::uint32_t>(rng.uniform(2, 4));
    auto params = small_params(24, 16, t, 6);
    auto tree = rng.bit() ? gen::random_chain(rng, 24, rng.uniform(1, 60), 6) : gen::random_tree(rng, 24, 20, 6);
    auto b = global_setup(params, tree, rng);
    for (int k = 0; k < 50; ++k) {
      const CounterIndex i{static_cast<std::uint32_t>(rng.uniform(1, params.l))};
      const auto x = gen::random_packet(rng, 24);
      ASSERT_EQ(private_eval(b, x, i), traverse(tree, x));
    }
  }
}

TEST(Merge, VerdictsAndRewrite) {
  auto rng = RandomSource::seeded(15);
  auto params = small_params(16, 4, 2, 4);
  // Rewrite the low byte when the high byte is 0xAB; drop when it is 0xCD.
  auto tree = build_chain({{T("10101011********"), T("********00010010")}, {T("11001101********"), T("0000000000000000")}});
  auto b = global_setup(params, tree, rng);
  auto run = [&](const char* h) {
    Packet x{B(h), {9}, 0};
    auto sp = split_packet(x, CounterIndex{2}, b.entry.blinds);
    std::vector<TraversalShares> shares;
    for (const auto& pc : b.processors) shares.push_back(private_traversal(pc, sp.reader, CounterIndex{2}));
    return merge_shares(CounterIndex{2}, sp.writer, shares, b.client.blinds, 2);
  };
  auto fwd = run("1010101111111111");
  EXPECT_EQ(fwd.kind, VerdictKind::forwarded);
  EXPECT_EQ(fwd.packet.header, B("1010101100010010"));
  EXPECT_EQ(fwd.packet.payload, std::vector<std::uint8_t>{9});
  auto drop = run("1100110111111111");
  EXPECT_EQ(drop.kind, VerdictKind::dropped);
  EXPECT_TRUE(drop.packet.header.is_zero());
  auto id = run("0000000111111111");
  EXPECT_EQ(id.packet.header, B("0000000111111111"));
}

TEST(Merge, RejectsShareSetMistakes) {
  auto rng = RandomSource::seeded(16);
  auto b = global_setup(small_params(8, 4), PolicyTree(8), rng);
  Packet x{B("10110011"), {}, 0};
  auto sp = split_packet(x, CounterIndex{1}, b.entry.blinds);
  std::vector<TraversalShares> one{private_traversal(b.processors[0], sp.reader, CounterIndex{1})};
  EXPECT_THROW(merge_shares(CounterIndex{1}, sp.writer, one, b.client.blinds, 2), ReassemblyError);
  one.push_back(private_traversal(b.processors[1], sp.reader, CounterIndex{2}));
  EXPECT_THROW(merge_shares(CounterIndex{1}, sp.writer, one, b.client.blinds, 2), ReassemblyError);
}

TEST(DummyFlag, Sharing) {
  auto rng = RandomSource::seeded(17);
  for (int k = 0; k < 100; ++k) {
    auto s = split_dummy_flag(true, 2, rng);
    if (s[0] == 0) {
      EXPECT_EQ(s[1], 1);
    }
  }
  for (int k = 0; k < 1000; ++k) {
    const bool real = rng.bit();
    auto s = split_dummy_flag(real, 3, rng);
    EXPECT_EQ((s[0] ^ s[1] ^ s[2]) == 1, real);
  }
  std::size_t ones = 0;
  for (int k = 0; k < 10000; ++k) ones += split_dummy_flag(true, 2, rng)[1];
  EXPECT_NEAR(static_cast<double>(ones) / 1e4, 0.5, 0.02);
}

TEST(DummyPacket, SeedsDiffer) {
  auto a = RandomSource::seeded(1), b = RandomSource::seeded(2);
  EXPECT_NE(make_dummy_packet(104, 16, a), make_dummy_packet(104, 16, b));
  EXPECT_EQ(make_dummy_packet(104, 16, a).payload.size(), 16u);
}
