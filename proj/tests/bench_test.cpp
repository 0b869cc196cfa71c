#include <gtest/gtest.h>

#include <cmath>

#include "splitbox/bench.hpp"

using namespace splitbox;
using namespace splitbox::bench;

namespace {

BenchConfig small(Mode mode, std::size_t packets = 3000) {
  BenchConfig cfg;
  cfg.mode = mode;
  cfg.trace_spec.count = packets;
  cfg.rule_counts = {1, 10, 30};
  cfg.loads = {0.1, 0.9};
  return cfg;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out(1);
  for (char c : s) {
    if (c == sep) {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace

TEST(Stats, PercentileMatchesHandComputation) {
  EXPECT_EQ(percentile({}, 0.5), 0);
  EXPECT_EQ(percentile({5}, 0.99), 5);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(percentile({0, 10}, 0.99), 9.9);
  EXPECT_EQ(loss_bound(10000, 1e-5), 1u);
  EXPECT_EQ(loss_bound(1000000, 1e-5), 10u);
}

TEST(Search, FindsStepThreshold) {
  for (double threshold : {1234.0, 98765.0, 3.5e6}) {
    auto loss = [&](double rate) { return rate <= threshold ? std::size_t{0} : std::size_t{5}; };
    for (double hint : {threshold / 10, threshold * 3}) {
      const double got = max_sustainable_rate(loss, hint, 1, 30);
      EXPECT_LE(got, threshold);
      EXPECT_GT(got, threshold * 0.999) << hint;
    }
  }
}

TEST(Plain, SingleServerLossMatchesCapacity) {
  std::vector<Packet> packets(20000, Packet{BitString(104), std::vector<std::uint8_t>(100), 0});
  std::vector<std::size_t> attempts(packets.size(), 0);
  PlainProfile prof{1000, 0, 0};  // 1 us per packet: 1 Mpps capacity
  fabric::LinkParams link;
  fabric::PacerParams pacer;
  pacer.rate_pps = 700'000;
  EXPECT_EQ(run_plain(packets, attempts, prof, 128, link, pacer).lost, 0u);
  pacer.rate_pps = 1'300'000;
  auto over = run_plain(packets, attempts, prof, 128, link, pacer);
  // Roughly the excess over capacity is turned away.
  EXPECT_NEAR(static_cast<double>(over.lost) / 20000.0, 1.0 - 1.0 / 1.3, 0.05);
  EXPECT_EQ(over.lost + over.delivered, 20000u);
}

TEST(Nat, VariantIsValidAndRewritesDestination) {
  auto rng = RandomSource::seeded(70);
  auto trace = firewall::generate_trace(firewall::TraceSpec{.count = 200}, rng);
  auto rules = firewall::random_ruleset(12, trace, rng);
  auto nat = nat_variant(rules);
  EXPECT_TRUE(validate_tree(nat.tree).empty());
  EXPECT_EQ(nat.tree.parent_count(), rules.size());
  for (const auto& rec : trace.records) {
    const Packet p = firewall::to_packet(rec, 0);
    const auto ref = firewall::ReferenceFilter(rules)(p.header);
    const auto want = expected_output(ref, p, &nat.translate);
    const Packet got = traverse(nat.tree, p);
    if (want) {
      EXPECT_EQ(got, *want);
    } else {
      EXPECT_TRUE(got.header.is_zero());
    }
  }
}

TEST(Equivalence, ZeroMismatchesWithRewritesAndDummies) {
  auto cfg = small(Mode::equivalence);
  cfg.rule_counts = {1, 25, 60};
  cfg.rho_values = {1.0, 0.5};
  auto rep = run_bench(cfg);
  EXPECT_TRUE(rep.ok()) << to_text(rep);
  ASSERT_EQ(rep.rows.size(), 12u);
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.mismatches, 0u);
    EXPECT_TRUE(row.conserved);
    EXPECT_EQ(row.loss, 0);
    if (row.rho < 1) {
      EXPECT_GT(row.stats.at("entry.dummies"), 0u);
      EXPECT_EQ(row.stats.at("client.forwarded") + row.stats.at("client.dropped"), row.packets);
    }
  }
}

TEST(Equivalence, ThreeProcessors) {
  auto cfg = small(Mode::equivalence, 2000);
  cfg.t = 3;
  cfg.rule_counts = {40};
  EXPECT_TRUE(run_bench(cfg).ok());
}

TEST(Equivalence, UdpCarrier) {
  auto cfg = small(Mode::equivalence, 1000);
  cfg.rule_counts = {20};
  cfg.carrier = Carrier::udp;
  cfg.nat_variant = false;
  auto rep = run_bench(cfg);
  EXPECT_TRUE(rep.ok()) << to_text(rep);
}

TEST(Throughput, DecreasesWithRulesAndStaysBelowPlaintext) {
  auto cfg = small(Mode::throughput);
  cfg.rule_counts = {1, 10, 30, 60};
  auto rep = run_bench(cfg);
  ASSERT_TRUE(rep.ok());
  ASSERT_EQ(rep.rows.size(), 4u);
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const auto& row = rep.rows[k];
    EXPECT_LT(row.real_pps, row.plain_pps);
    EXPECT_LE(row.loss, 1.0 / 3000.0);
    EXPECT_TRUE(row.conserved);
    if (k > 0) {
      EXPECT_LE(row.real_pps, rep.rows[k - 1].real_pps * 1.1);
    }
  }
  EXPECT_LT(rep.rows.back().real_pps, 0.7 * rep.rows.front().real_pps);
}

TEST(Throughput, MoreWorkersHelpWhenProcessorsBottleneck) {
  auto cfg = small(Mode::throughput);
  cfg.rule_counts = {30};
  cfg.workers = {1, 2};
  auto rep = run_bench(cfg);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_GT(rep.rows[1].real_pps, 1.5 * rep.rows[0].real_pps);
}

TEST(Latency, DelayGrowsWithLoad) {
  auto cfg = small(Mode::latency);
  auto rep = run_bench(cfg);
  ASSERT_TRUE(rep.ok());
  ASSERT_EQ(rep.rows.size(), 6u);
  for (std::size_t k = 0; k < rep.rows.size(); k += 2) {
    EXPECT_EQ(rep.rows[k].load, 0.1);
    EXPECT_GT(rep.rows[k + 1].p50_ns, rep.rows[k].p50_ns);
    EXPECT_GE(rep.rows[k + 1].p99_ns, rep.rows[k + 1].p50_ns);
  }
}

TEST(LSweep, TablesScaleLinearlyAndCounterWraps) {
  auto cfg = small(Mode::lsweep, 10000);
  cfg.rule_counts = {5};
  cfg.l_values = {64, 1024, 8192};
  auto rep = run_bench(cfg);
  ASSERT_TRUE(rep.ok()) << to_text(rep);
  ASSERT_EQ(rep.rows.size(), 3u);
  const std::size_t per_row = rep.rows[0].table_bytes / 64;
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.table_bytes, per_row * row.l);
    EXPECT_EQ(row.mismatches, 0u);
  }
  EXPECT_GT(rep.rows[0].stats.at("soak.wraps"), 100u);
  // The reference profile has no table-size term.
  EXPECT_EQ(rep.rows[0].real_pps, rep.rows[2].real_pps);
}

TEST(DummyRate, HalfRhoHalvesEffectiveThroughput) {
  auto cfg = small(Mode::dummyrate, 10000);
  cfg.rule_counts = {10};
  cfg.rho_values = {1.0, 0.5};
  auto rep = run_bench(cfg);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_NEAR(rep.rows[1].real_pps / rep.rows[0].real_pps, 0.5, 0.05);
  // Dummy share of the emitted stream.
  const auto& s = rep.rows[1].stats;
  const double emitted = static_cast<double>(s.at("entry.emitted"));
  const double frac = static_cast<double>(s.at("entry.dummies")) / emitted;
  EXPECT_NEAR(frac, 0.5, 2.576 * std::sqrt(0.25 / emitted));

  // rho = 1 reproduces the throughput-mode point exactly.
  auto base = small(Mode::throughput, 10000);
  base.rule_counts = {10};
  auto t = run_bench(base);
  EXPECT_EQ(t.rows[0].real_pps, rep.rows[0].real_pps);
}

TEST(Csv, FixedSchemaAndReproducible) {
  auto cfg = small(Mode::throughput, 1000);
  cfg.rule_counts = {1, 5};
  const auto a = to_csv(run_bench(cfg)), b = to_csv(run_bench(cfg));
  EXPECT_EQ(a, b);
  const auto lines = split(a, '\n');
  ASSERT_EQ(lines.size(), 4u);  // header, two rows, trailing empty
  EXPECT_EQ(split(lines[0], ','), csv_columns());
  for (std::size_t k = 1; k <= 2; ++k) EXPECT_EQ(split(lines[k], ',').size(), csv_columns().size());
  EXPECT_NE(lines[1].find("entry.emitted="), std::string::npos);

  auto eq = to_csv(run_bench(small(Mode::equivalence, 500)));
  EXPECT_EQ(split(split(eq, '\n')[0], ','), csv_columns());
}

TEST(Config, RejectsInvalid) {
  BenchConfig cfg;
  cfg.t = 1;
  EXPECT_THROW(run_bench(cfg), ConfigError);
  cfg = BenchConfig{};
  cfg.rho_values = {0};
  EXPECT_THROW(run_bench(cfg), ConfigError);
  cfg = BenchConfig{};
  cfg.loads = {1.5};
  EXPECT_THROW(run_bench(cfg), ConfigError);
  cfg = BenchConfig{};
  cfg.mode = Mode::throughput;
  cfg.carrier = Carrier::udp;
  EXPECT_THROW(run_bench(cfg), ConfigError);
  EXPECT_THROW(parse_mode("fast"), ConfigError);
  EXPECT_EQ(parse_mode("lsweep"), Mode::lsweep);
}
