#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "splitbox/firewall.hpp"
#include "splitbox/protocol.hpp"

using namespace splitbox;
using namespace splitbox::firewall;

namespace {

RuleAction traverse_verdict(const PolicyTree& tree, const BitString& header) {
  return traverse(tree, Packet{header, {}, 0}).header.is_zero() ? RuleAction::drop : RuleAction::allow;
}

FiveTuple random_tuple(RandomSource& rng) {
  return {static_cast<std::uint32_t>(rng.next_u64()), static_cast<std::uint32_t>(rng.next_u64()),
          static_cast<std::uint8_t>(rng.uniform(0, 255)), static_cast<std::uint16_t>(rng.uniform(0, 65535)),
          static_cast<std::uint16_t>(rng.uniform(0, 65535))};
}

}  // namespace

TEST(Dsl, AllowRuleWithStarsAndExactFields) {
  auto rules = parse_rules("allow src=127.*.*.* dst=* proto=6 sport=* dport=80\n");
  ASSERT_EQ(rules.size(), 1u);
  const auto& r = rules[0];
  EXPECT_EQ(r.action, RuleAction::allow);
  EXPECT_EQ(r.src.to_string(), "01111111" + std::string(24, '*'));
  EXPECT_EQ(r.dst, TriStateString::stars(32));
  EXPECT_EQ(r.proto.to_string(), "00000110");
  EXPECT_EQ(r.sport, TriStateString::stars(16));
  EXPECT_EQ(r.dport.to_string(), "0000000001010000");
  EXPECT_EQ(r.fixed_bits(), 32u);
}

TEST(Dsl, PrefixMaskFixesLeadingBits) {
  auto rules = parse_rules("drop src=10.0.0.0/8 proto=17\n");
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(rules[0].action, RuleAction::drop);
  EXPECT_EQ(rules[0].src.fixed_count(), 8u);
  EXPECT_EQ(rules[0].src.to_string(), "00001010" + std::string(24, '*'));
  // Matching cost is carried by the compiled projection weight.
  auto w = parse_rules("allow src=10.0.0.0/8\n");
  EXPECT_EQ(projection(w[0].match()).weight(), 8u);
  EXPECT_EQ(projection(w[0].match()).size(), kHeaderBits);
}

TEST(Dsl, UnalignedRangeIsInexpressible) {
  try {
    parse_rules("allow src=10.0.0.5-10.0.0.9 proto=6\n");
    FAIL() << "range accepted";
  } catch (const InexpressibleRangeError& e) {
    EXPECT_EQ(e.field(), "src");
  }
  EXPECT_THROW(parse_rules("allow dport=1000-1999\n"), InexpressibleRangeError);
  auto ok = parse_rules("allow dst=10.0.0.0-10.0.0.255 dport=1024-2047\n");
  EXPECT_EQ(ok[0].dst.fixed_count(), 24u);
  EXPECT_EQ(ok[0].dport.fixed_count(), 6u);
}

TEST(Dsl, SyntaxErrorsCarryLineNumbers) {
  const char* bad[] = {"pass src=*", "allow src", "allow colour=red", "allow src=* src=*", "allow proto=256",
                       "allow src=1.2.3", "allow src=1.2.3.4/33", "allow dport=-1", "allow src=1.2.3.4.5"};
  for (const char* b : bad) {
    try {
      parse_rules(std::string("# header\n\n") + b + "\n");
      ADD_FAILURE() << "accepted: " << b;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 3u) << b;
    }
  }
}

TEST(Dsl, HostBitsUnderMaskAreIgnoredAndFormatRoundTrips) {
  auto a = parse_rules("drop src=10.1.2.3/8\n");
  auto b = parse_rules("drop src=10.0.0.0/8\n");
  EXPECT_EQ(a, b);
  auto rng = RandomSource::seeded(21);
  Trace t;
  for (int k = 0; k < 200; ++k) t.records.push_back({random_tuple(rng), 0});
  auto rules = random_ruleset(300, t, rng, 0);
  rules.push_back(parse_rules("allow src=127.*.*.* dst=10.0.*.7 dport=4096-8191 # note\n")[0]);
  EXPECT_EQ(parse_rules(format_rules(rules)), rules);
}

TEST(Header, PositionalEncoding) {
  auto h = encode_header({1, 0, 0, 0, 0});
  EXPECT_EQ(h.size(), kHeaderBits);
  EXPECT_EQ(h.weight(), 1u);
  EXPECT_TRUE(h.get(31));
  auto d = encode_header({0, 0, 0, 0, 1});
  EXPECT_TRUE(d.get(103));
  EXPECT_TRUE(encode_header({0, 0, 0x80, 0, 0}).get(64));
  EXPECT_EQ(format_ip(0x7F000001), "127.0.0.1");
}

TEST(Header, RoundTripRandomTuples) {
  auto rng = RandomSource::seeded(22);
  for (int k = 0; k < 10000; ++k) {
    auto t = random_tuple(rng);
    ASSERT_EQ(decode_header(encode_header(t)), t);
  }
}

TEST(Compile, PrefixRuleMatchesExactlyFirstOctet) {
  auto rules = parse_rules("drop src=127.*.*.*\n");
  auto tree = compile_rules(rules);
  auto rng = RandomSource::seeded(23);
  for (std::uint32_t first = 0; first < 256; ++first) {
    for (int k = 0; k < 8; ++k) {
      auto t = random_tuple(rng);
      t.src = (first << 24) | (t.src & 0x00FFFFFF);
      const bool want_drop = first == 0x7F;
      EXPECT_EQ(traverse_verdict(tree, encode_header(t)) == RuleAction::drop, want_drop) << first;
    }
  }
}

TEST(Compile, EmptyRulesetForwardsEverything) {
  auto tree = compile_rules({});
  EXPECT_EQ(tree.parent_count(), 0u);
  auto rng = RandomSource::seeded(24);
  for (int k = 0; k < 1000; ++k) {
    Packet x{encode_header(random_tuple(rng)), {1, 2}, 0};
    EXPECT_EQ(traverse(tree, x), x);
  }
}

TEST(Compile, DropAllDropsEverything) {
  auto rules = parse_rules("drop\n");
  auto tree = compile_rules(rules);
  auto rng = RandomSource::seeded(25);
  for (int k = 0; k < 1000; ++k) {
    EXPECT_EQ(traverse_verdict(tree, encode_header(random_tuple(rng))), RuleAction::drop);
  }
  // The all-star match carries no fixed bits, so private setup refuses it
  // unless weak matches are allowed explicitly.
  ProtocolParams p;
  p.l = 4;
  auto seeded = RandomSource::seeded(1);
  EXPECT_THROW(global_setup(p, tree, seeded), WeakMatchError);
  EXPECT_NO_THROW(global_setup(p, tree, seeded, SetupOptions{true}));
}

TEST(Compile, SixtyRulesGiveSixtyParents) {
  auto rng = RandomSource::seeded(26);
  auto w = make_controlled_workload(60, TraceSpec{.count = 100}, rng);
  auto tree = compile_rules(w.rules);
  EXPECT_EQ(tree.parent_count(), 60u);
  EXPECT_TRUE(validate_tree(tree).empty());
  const auto& drop = drop_action();
  EXPECT_EQ(projection(drop).weight(), kHeaderBits);
  EXPECT_TRUE(drop.value().is_zero());
}

TEST(Compile, MatchWeightEqualsFixedBits) {
  auto rng = RandomSource::seeded(27);
  Trace t;
  for (int k = 0; k < 100; ++k) t.records.push_back({random_tuple(rng), 0});
  for (const auto& r : random_ruleset(200, t, rng)) EXPECT_EQ(projection(r.match()).weight(), r.fixed_bits());
}

TEST(Trace, MeanPayloadNearTarget) {
  for (auto model : {SizeModel::fixed, SizeModel::uniform, SizeModel::bimodal}) {
    auto rng = RandomSource::seeded(28);
    TraceSpec spec;
    spec.sizes = model;
    auto trace = generate_trace(spec, rng);
    ASSERT_EQ(trace.records.size(), 10000u);
    double sum = 0;
    for (const auto& r : trace.records) sum += r.payload_len;
    EXPECT_NEAR(sum / 10000.0, 1024.0, 0.05 * 1024.0) << static_cast<int>(model);
  }
}

TEST(Trace, NoAllZeroHeaders) {
  auto rng = RandomSource::seeded(29);
  TraceSpec spec;
  spec.sources = 1;
  spec.destinations = 1;
  for (const auto& r : generate_trace(spec, rng).records) EXPECT_FALSE(encode_header(r.tuple).is_zero());
}

TEST(Trace, SameSeedSameBytes) {
  auto a = RandomSource::seeded(30), b = RandomSource::seeded(30), c = RandomSource::seeded(31);
  const TraceSpec spec;
  const auto ta = encode_trace(generate_trace(spec, a));
  EXPECT_EQ(ta, encode_trace(generate_trace(spec, b)));
  EXPECT_NE(ta, encode_trace(generate_trace(spec, c)));
}

TEST(Trace, FileRoundTripAndErrors) {
  auto rng = RandomSource::seeded(32);
  auto trace = generate_trace(TraceSpec{.count = 500}, rng);
  const auto path = (std::filesystem::temp_directory_path() / "splitbox_trace_test.sbtr").string();
  write_file_bytes(path, encode_trace(trace));
  const auto bytes = read_file_bytes(path);
  std::remove(path.c_str());
  EXPECT_EQ(bytes.size(), 10 + 500 * kTraceRecordBytes);
  EXPECT_EQ(decode_trace(bytes), trace);
  auto v = bytes;
  v.pop_back();
  EXPECT_THROW(decode_trace(v), DecodeError);
  v = bytes;
  v[0] = 'X';
  EXPECT_THROW(decode_trace(v), DecodeError);
  EXPECT_THROW(read_file_bytes("/nonexistent/trace"), ConfigError);
}

TEST(Reference, ControlledWorkloadTakesExactlyRAttempts) {
  for (std::size_t r : {1, 2, 10, 60}) {
    auto rng = RandomSource::seeded(33);
    auto w = make_controlled_workload(r, TraceSpec{.count = 2000}, rng);
    ASSERT_EQ(w.rules.size(), r);
    for (const auto& res : reference_filter(w.rules, w.trace)) {
      EXPECT_EQ(res.attempts, r);
      EXPECT_EQ(res.verdict, RuleAction::allow);
      EXPECT_EQ(res.rule, std::optional<std::size_t>(r - 1));
    }
  }
}

TEST(Reference, AllAcceptRulesetDropsNothing) {
  auto rng = RandomSource::seeded(34);
  auto w = make_controlled_workload(30, TraceSpec{.count = 5000}, rng);
  auto tree = compile_rules(w.rules);
  std::size_t drops = 0;
  for (const auto& rec : w.trace.records) drops += traverse_verdict(tree, encode_header(rec.tuple)) == RuleAction::drop;
  EXPECT_EQ(drops, 0u);
}

TEST(Reference, AgreesWithCompiledTree) {
  auto rng = RandomSource::seeded(35);
  for (int trial = 0; trial < 20; ++trial) {
    auto trace = generate_trace(TraceSpec{.count = 500, .sources = 16, .destinations = 8}, rng);
    auto rules = random_ruleset(rng.uniform(1, 60), trace, rng);
    auto tree = compile_rules(rules);
    auto ref = reference_filter(rules, trace);
    std::size_t drops = 0;
    for (std::size_t k = 0; k < trace.records.size(); ++k) {
      EXPECT_EQ(ref[k].verdict, traverse_verdict(tree, encode_header(trace.records[k].tuple)));
      drops += ref[k].verdict == RuleAction::drop;
    }
    if (trial == 0) {
      EXPECT_GT(drops, 0u);
    }
  }
}

TEST(Reference, ReorderingPreservesVerdicts) {
  auto rng = RandomSource::seeded(36);
  for (int trial = 0; trial < 10; ++trial) {
    auto trace = generate_trace(TraceSpec{.count = 2000, .sources = 8, .destinations = 4}, rng);
    auto rules = random_ruleset(40, trace, rng);
    auto sorted = reorder_by_frequency(rules, trace);
    EXPECT_TRUE(std::is_permutation(sorted.begin(), sorted.end(), rules.begin()));
    auto a = reference_filter(rules, trace), b = reference_filter(sorted, trace);
    std::size_t before = 0, after = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a[k].verdict, b[k].verdict);
      before += a[k].attempts;
      after += b[k].attempts;
    }
    EXPECT_LE(after, before);
  }
}
