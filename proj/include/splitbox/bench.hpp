#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "splitbox/fabric.hpp"
#include "splitbox/firewall.hpp"
#include "splitbox/protocol.hpp"
#include "splitbox/udp.hpp"

// Benchmark harness: equivalence, throughput, latency, l sweep and dummy
// rate, all over the firewall use case.
namespace splitbox::bench {

enum class Mode { equivalence, throughput, latency, lsweep, dummyrate };
enum class Carrier { inproc, udp };
enum class ProfileKind { reference, measured };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::equivalence: return "equivalence";
    case Mode::throughput: return "throughput";
    case Mode::latency: return "latency";
    case Mode::lsweep: return "lsweep";
    case Mode::dummyrate: return "dummyrate";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::equivalence, Mode::throughput, Mode::latency, Mode::lsweep, Mode::dummyrate}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown bench mode '" + s + "'");
}

inline std::vector<std::size_t> default_rule_counts() {
  std::vector<std::size_t> out{1};
  for (std::size_t r = 5; r <= 60; r += 5) out.push_back(r);
  return out;
}

// "gen:count=5000,payload=512,sizes=fixed,sources=64,dests=32,controlled".
// Unlisted keys keep their defaults; "gen:" alone is the default spec.
inline firewall::TraceSpec parse_trace_spec(std::string_view text) {
  if (!text.starts_with("gen:")) throw ConfigError("trace spec must start with 'gen:'");
  text.remove_prefix(4);
  firewall::TraceSpec spec;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    const std::string key(item.substr(0, eq));
    const std::string value = eq == std::string_view::npos ? "" : std::string(item.substr(eq + 1));
    auto number = [&](std::uint64_t max) {
      auto v = firewall::detail::parse_uint(value, max);
      if (!v) throw ConfigError("bad value for trace spec key '" + key + "'");
      return *v;
    };
    if (key == "count") {
      spec.count = number(100'000'000);
    } else if (key == "payload") {
      spec.mean_payload = static_cast<std::uint32_t>(number(60'000));
    } else if (key == "sources") {
      spec.sources = static_cast<std::uint32_t>(number(1'000'000));
    } else if (key == "dests") {
      spec.destinations = static_cast<std::uint32_t>(number(1'000'000));
    } else if (key == "controlled" && value.empty()) {
      spec.controlled = true;
    } else if (key == "sizes") {
      if (value == "fixed") {
        spec.sizes = firewall::SizeModel::fixed;
      } else if (value == "uniform") {
        spec.sizes = firewall::SizeModel::uniform;
      } else if (value == "bimodal") {
        spec.sizes = firewall::SizeModel::bimodal;
      } else {
        throw ConfigError("unknown size model '" + value + "'");
      }
    } else {
      throw ConfigError("unknown trace spec key '" + key + "'");
    }
  }
  return spec;
}

struct BenchConfig {
  Mode mode = Mode::equivalence;
  std::vector<std::size_t> rule_counts = default_rule_counts();
  std::optional<std::vector<firewall::FirewallRule>> rules;  // fixed ruleset instead of generated ones
  std::optional<firewall::Trace> trace;                      // fixed trace instead of generated ones
  firewall::TraceSpec trace_spec;
  std::uint32_t t = 2;
  std::vector<std::uint32_t> l_values{1024};
  std::vector<double> rho_values{1.0};
  std::vector<std::uint32_t> workers{1};
  std::vector<double> loads{0.1, 0.3, 0.5, 0.7, 0.9};
  Carrier carrier = Carrier::inproc;
  ProfileKind profile = ProfileKind::reference;
  std::uint64_t seed = 1;
  std::size_t queue = 128;           // per-station ring size for loss measurements
  double loss_fraction = 1e-5;       // 0.001 %
  std::size_t search_iterations = 12;
  bool nat_variant = true;           // equivalence: also run a rewrite-action ruleset

  void validate() const {
    if (t < 2 || t > 255) throw ConfigError("t must be in [2, 255]");
    if (rule_counts.empty() && !rules) throw ConfigError("no rule counts");
    for (auto r : rule_counts) {
      if (r == 0) throw ConfigError("rule counts must be positive");
    }
    if (l_values.empty()) throw ConfigError("no l values");
    for (auto l : l_values) {
      if (l == 0) throw ConfigError("l must be positive");
    }
    for (double rho : rho_values) {
      if (!(rho > 0 && rho <= 1)) throw ConfigError("rho must be in (0, 1]");
    }
    for (auto w : workers) {
      if (w == 0) throw ConfigError("workers must be positive");
    }
    for (double f : loads) {
      if (!(f > 0 && f <= 1)) throw ConfigError("load fractions must be in (0, 1]");
    }
    if (trace_spec.count == 0 && !trace) throw ConfigError("trace needs at least one packet");
    if (carrier == Carrier::udp && mode != Mode::equivalence) {
      throw ConfigError("the udp carrier is supported for equivalence runs only");
    }
  }
};

// One CSV row. The column set is the same for every mode; fields a mode
// does not measure stay at zero.
struct BenchRow {
  std::string mode;
  std::string variant = "firewall";
  std::size_t r = 0;
  std::uint32_t t = 0;
  std::uint32_t l = 0;
  double rho = 1.0;
  std::uint32_t workers = 1;
  double load = 0;
  std::uint64_t seed = 0;
  std::size_t packets = 0;
  double offered_pps = 0;
  double pps = 0;        // emitted datagram tuples per second at the reported point
  double real_pps = 0;   // real packets per second
  double bytes_per_s = 0;
  double plain_pps = 0;
  double ratio = 0;      // real_pps / plain_pps
  double mean_ns = 0;
  double p50_ns = 0;
  double p99_ns = 0;
  double loss = 0;
  std::size_t mismatches = 0;
  std::size_t table_bytes = 0;
  bool conserved = true;
  StatsSnapshot stats;
};

struct BenchReport {
  Mode mode = Mode::equivalence;
  std::vector<BenchRow> rows;
  std::vector<std::string> failures;  // assertion failures; empty means pass
  bool ok() const noexcept { return failures.empty(); }
};

// ---------------------------------------------------------------------------
// Formatting

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string stats_field(const StatsSnapshot& s) {
  std::string out;
  for (const auto& [k, v] : s) {
    if (!out.empty()) out += ';';
    out += k + "=" + std::to_string(v);
  }
  return out;
}

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{"mode",     "variant",   "r",       "t",        "l",          "rho",
                                             "workers",  "load",      "seed",    "packets",  "offered_pps", "pps",
                                             "real_pps", "bytes_per_s", "plain_pps", "ratio", "mean_ns",    "p50_ns",
                                             "p99_ns",   "loss",      "mismatches", "table_bytes", "conserved", "stats"};
  return cols;
}

inline std::string to_csv(const BenchReport& rep) {
  std::string out;
  const auto& cols = csv_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) out += (k ? "," : "") + cols[k];
  out += '\n';
  for (const auto& r : rep.rows) {
    const std::vector<std::string> f{r.mode,
                                     r.variant,
                                     std::to_string(r.r),
                                     std::to_string(r.t),
                                     std::to_string(r.l),
                                     fmt_double(r.rho),
                                     std::to_string(r.workers),
                                     fmt_double(r.load),
                                     std::to_string(r.seed),
                                     std::to_string(r.packets),
                                     fmt_double(r.offered_pps),
                                     fmt_double(r.pps),
                                     fmt_double(r.real_pps),
                                     fmt_double(r.bytes_per_s),
                                     fmt_double(r.plain_pps),
                                     fmt_double(r.ratio),
                                     fmt_double(r.mean_ns),
                                     fmt_double(r.p50_ns),
                                     fmt_double(r.p99_ns),
                                     fmt_double(r.loss),
                                     std::to_string(r.mismatches),
                                     std::to_string(r.table_bytes),
                                     r.conserved ? "1" : "0",
                                     stats_field(r.stats)};
    for (std::size_t k = 0; k < f.size(); ++k) out += (k ? "," : "") + f[k];
    out += '\n';
  }
  return out;
}

inline std::string to_text(const BenchReport& rep) {
  std::ostringstream os;
  os << to_string(rep.mode) << ": " << rep.rows.size() << " row(s)\n";
  for (const auto& r : rep.rows) {
    os << "  " << r.variant << " r=" << r.r << " t=" << r.t << " l=" << r.l << " rho=" << fmt_double(r.rho)
       << " w=" << r.workers;
    switch (rep.mode) {
      case Mode::equivalence: os << " packets=" << r.packets << " mismatches=" << r.mismatches; break;
      case Mode::latency:
        os << " load=" << fmt_double(r.load) << " p50=" << fmt_double(r.p50_ns / 1e3) << "us p99=" << fmt_double(r.p99_ns / 1e3)
           << "us loss=" << fmt_double(r.loss);
        break;
      default:
        os << " real_pps=" << fmt_double(r.real_pps) << " plain_pps=" << fmt_double(r.plain_pps)
           << " ratio=" << fmt_double(r.ratio) << " loss=" << fmt_double(r.loss);
        if (rep.mode == Mode::lsweep) os << " table_bytes=" << r.table_bytes << " mismatches=" << r.mismatches;
    }
    os << (r.conserved ? "" : " NOT-CONSERVED") << '\n';
  }
  if (rep.ok()) {
    os << "all assertions passed\n";
  } else {
    for (const auto& f : rep.failures) os << "FAIL: " << f << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Statistics

inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct DelaySummary {
  double mean = 0, p50 = 0, p99 = 0;
};

inline DelaySummary summarize_delays(const fabric::RunReport& rep) {
  std::vector<double> d;
  for (const auto& p : rep.packets) {
    if (p.outcome != fabric::Outcome::lost) d.push_back(static_cast<double>(p.delay_ns()));
  }
  DelaySummary s;
  if (d.empty()) return s;
  s.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  s.p50 = percentile(d, 0.5);
  s.p99 = percentile(d, 0.99);
  return s;
}

inline std::size_t loss_bound(std::size_t packets, double fraction) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(packets))));
}

// Largest offered rate whose loss stays within the bound. loss_at must be
// monotone enough for bisection; `hint` is a rate near the capacity.
template <typename LossAt>
double max_sustainable_rate(LossAt&& loss_at, double hint, std::size_t allowed, std::size_t iterations) {
  double lo = 0, hi = std::max(1.0, hint);
  for (int k = 0; k < 40 && loss_at(hi) <= allowed; ++k) {
    lo = hi;
    hi *= 2;
  }
  for (std::size_t k = 0; k < iterations; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (loss_at(mid) <= allowed) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Plaintext baseline: one first-match filter behind the same ingress link.

struct PlainProfile {
  double base_ns = 150;
  double per_attempt_ns = 4;
  double per_byte_ns = 0.05;

  static PlainProfile reference() { return {}; }
  TimeNs cost(std::size_t attempts, std::size_t bytes) const {
    return fabric::ServiceProfile::to_ns(base_ns + per_attempt_ns * static_cast<double>(attempts) +
                                         per_byte_ns * static_cast<double>(bytes));
  }
};

// Times the reference filter on the given packets, payload copy included.
// The whole per-packet cost goes into the fixed term.
inline PlainProfile calibrate_plain(std::span<const firewall::FirewallRule> rules, std::span<const Packet> packets,
                                    std::size_t calls = 5000) {
  if (packets.empty()) throw ContractViolation("calibrate_plain needs packets");
  const firewall::ReferenceFilter filter(std::vector<firewall::FirewallRule>(rules.begin(), rules.end()));
  std::vector<std::uint8_t> sink(2048);
  std::size_t verdicts = 0;
  const double per_packet = fabric::detail::median_ns_per_call(calls, [&](std::size_t k) {
    const Packet& p = packets[k % packets.size()];
    verdicts += filter(p.header).verdict == firewall::RuleAction::allow ? 1 : 0;
    std::copy_n(p.payload.begin(), std::min(p.payload.size(), sink.size()), sink.begin());
    asm volatile("" : : "r"(sink.data()), "r"(verdicts) : "memory");
  });
  PlainProfile prof;
  prof.base_ns = std::max(1.0, per_packet);
  prof.per_attempt_ns = 0;
  prof.per_byte_ns = 0;
  return prof;
}

struct PlainRun {
  std::size_t lost = 0;
  std::size_t delivered = 0;
};

inline PlainRun run_plain(std::span<const Packet> packets, std::span<const std::size_t> attempts, const PlainProfile& prof,
                          std::size_t queue, const fabric::LinkParams& link, const fabric::PacerParams& pacer) {
  std::vector<std::size_t> sizes;
  sizes.reserve(packets.size());
  for (const auto& p : packets) sizes.push_back(p.header.bytes().size() + p.payload.size());
  const auto arrivals = fabric::pace(sizes, pacer);
  PlainRun out;
  double link_free = 0;
  std::deque<TimeNs> in_system;  // departure times, nondecreasing
  TimeNs last_departure = 0;
  for (std::size_t k = 0; k < packets.size(); ++k) {
    const double a = static_cast<double>(arrivals[k]);
    if (link.buffer_bytes != fabric::kUnbounded && link_free > a &&
        (link_free - a) * link.bandwidth_bps / 8e9 > static_cast<double>(link.buffer_bytes)) {
      ++out.lost;
      continue;
    }
    link_free = std::max(link_free, a) + std::ceil(static_cast<double>(sizes[k]) * 8e9 / link.bandwidth_bps);
    const auto at = static_cast<TimeNs>(link_free) + link.propagation_ns;
    while (!in_system.empty() && in_system.front() <= at) in_system.pop_front();
    if (in_system.size() > queue) {  // one in service plus a full ring
      ++out.lost;
      continue;
    }
    last_departure = std::max(at, last_departure) + prof.cost(attempts[k], packets[k].payload.size());
    in_system.push_back(last_departure);
    ++out.delivered;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration points

struct Point {
  std::vector<firewall::FirewallRule> rules;
  firewall::Trace trace;
  PolicyTree tree{firewall::kHeaderBits};
  SetupBundle bundle;
  std::vector<Packet> packets;
  std::vector<std::size_t> attempts;  // reference filter attempts per packet
};

inline std::size_t table_bytes(const SetupBundle& b) {
  std::size_t total = b.entry.blinds.size() * bytes_for_bits(b.entry.params.n);
  for (const auto& p : b.processors) total += p.table.raw().size();
  return total;
}

inline ProtocolParams point_params(std::uint32_t t, std::uint32_t l, double rho) {
  ProtocolParams p;
  p.n = firewall::kHeaderBits;
  p.l = l;
  p.t = t;
  if (rho < 1.0) set_rho(p, rho);
  return p;
}

inline void finish_point(Point& pt, const ProtocolParams& params, RandomSource& rng) {
  pt.tree = firewall::compile_rules(pt.rules);
  pt.bundle = global_setup(params, pt.tree, rng);
  pt.packets = firewall::to_packets(pt.trace);
  for (const auto& res : firewall::reference_filter(pt.rules, pt.trace)) pt.attempts.push_back(res.attempts);
}

// Every packet traverses exactly r rules (controlled-r workload), unless the
// configuration fixes the rules or the trace.
inline Point controlled_point(const BenchConfig& cfg, std::size_t r, std::uint32_t l, double rho, std::uint64_t seed) {
  Point pt;
  auto rng = RandomSource::seeded(seed);
  if (cfg.rules || cfg.trace) {
    pt.trace = cfg.trace ? *cfg.trace : firewall::generate_trace(cfg.trace_spec, rng);
    pt.rules = cfg.rules ? *cfg.rules : firewall::random_ruleset(r, pt.trace, rng);
  } else {
    auto w = firewall::make_controlled_workload(r, cfg.trace_spec, rng);
    pt.rules = std::move(w.rules);
    pt.trace = std::move(w.trace);
  }
  finish_point(pt, point_params(cfg.t, l, rho), rng);
  return pt;
}

// Mixed verdicts: random rules carved from the trace.
inline Point random_point(const BenchConfig& cfg, std::size_t r, std::uint32_t t, std::uint32_t l, double rho,
                          std::uint64_t seed) {
  Point pt;
  auto rng = RandomSource::seeded(seed);
  firewall::TraceSpec spec = cfg.trace_spec;
  spec.controlled = false;
  pt.trace = cfg.trace ? *cfg.trace : firewall::generate_trace(spec, rng);
  pt.rules = cfg.rules ? *cfg.rules : firewall::random_ruleset(r, pt.trace, rng);
  finish_point(pt, point_params(t, l, rho), rng);
  return pt;
}

inline fabric::ServiceProfile profile_for(const BenchConfig& cfg, const Point& pt) {
  if (cfg.profile == ProfileKind::reference) return fabric::ServiceProfile::reference();
  return fabric::calibrate_profile(pt.bundle, std::span(pt.packets).first(std::min<std::size_t>(pt.packets.size(), 2000)));
}

inline PlainProfile plain_profile_for(const BenchConfig& cfg, const Point& pt) {
  if (cfg.profile == ProfileKind::reference) return PlainProfile::reference();
  return calibrate_plain(pt.rules, pt.packets);
}

// Rough capacity of the private pipeline from the slowest station, in real
// packets per second.
inline double capacity_estimate(const fabric::ServiceProfile& prof, const Point& pt, std::uint32_t workers) {
  const auto& params = pt.bundle.entry.params;
  double payload = 0, evals = 0;
  for (std::size_t k = 0; k < pt.packets.size(); ++k) {
    payload += static_cast<double>(pt.packets[k].payload.size());
    evals += static_cast<double>(pt.attempts[k]);
  }
  payload /= static_cast<double>(pt.packets.size());
  evals /= static_cast<double>(pt.packets.size());
  const double emissions = 1.0 / params.rho();
  const double entry = emissions * static_cast<double>(prof.entry(static_cast<std::size_t>(payload)));
  const double proc = emissions * static_cast<double>(prof.processor(static_cast<std::size_t>(std::ceil(evals)))) / workers;
  const double client =
      emissions * (static_cast<double>(params.t) * static_cast<double>(prof.client(kWireHeaderBytes + 2 * params.header_bytes(), false)) +
                   static_cast<double>(prof.client(kWireHeaderBytes + params.header_bytes() + static_cast<std::size_t>(payload), true)));
  return 1e9 / std::max({entry, proc, client, 1.0});
}

inline std::size_t real_lost(const fabric::RunReport& rep) {
  return rep.packets.size() - rep.count(fabric::Outcome::forwarded) - rep.count(fabric::Outcome::dropped);
}

inline fabric::Topology loss_topology(const BenchConfig& cfg, const fabric::ServiceProfile& prof, std::uint32_t workers,
                                      double rate, std::uint64_t seed) {
  auto topo = fabric::Topology::bounded(cfg.queue);
  topo.workers = workers;
  topo.profile = prof;
  topo.pacer.rate_pps = rate;
  topo.pacer.seed = seed;
  topo.entry_seed = seed;
  return topo;
}

struct ThroughputPoint {
  double real_pps = 0;
  double plain_pps = 0;
  fabric::RunReport at_rate;  // run at the reported rate
};

inline ThroughputPoint measure_throughput(const BenchConfig& cfg, const Point& pt, const fabric::ServiceProfile& prof,
                                          const PlainProfile& plain, std::uint32_t workers, std::uint64_t seed,
                                          bool with_plain = true) {
  const std::size_t allowed = loss_bound(pt.packets.size(), cfg.loss_fraction);
  ThroughputPoint out;
  auto private_loss = [&](double rate) {
    return real_lost(fabric::run_topology(loss_topology(cfg, prof, workers, rate, seed), pt.bundle, pt.packets));
  };
  out.real_pps = max_sustainable_rate(private_loss, capacity_estimate(prof, pt, workers), allowed, cfg.search_iterations);
  out.at_rate = fabric::run_topology(loss_topology(cfg, prof, workers, out.real_pps, seed), pt.bundle, pt.packets);
  if (with_plain) {
    const auto link = fabric::Topology::bounded(cfg.queue).entry_client;
    auto plain_loss = [&](double rate) {
      fabric::PacerParams pacer;
      pacer.rate_pps = rate;
      pacer.seed = seed;
      return run_plain(pt.packets, pt.attempts, plain, cfg.queue, link, pacer).lost;
    };
    double plain_cost = 0;
    for (std::size_t k = 0; k < pt.packets.size(); ++k) {
      plain_cost += static_cast<double>(plain.cost(pt.attempts[k], pt.packets[k].payload.size()));
    }
    const double hint = 1e9 / std::max(1.0, plain_cost / static_cast<double>(pt.packets.size()));
    out.plain_pps = max_sustainable_rate(plain_loss, hint, allowed, cfg.search_iterations);
  }
  return out;
}

inline double mean_wire_bytes(const Point& pt) {
  double b = 0;
  for (const auto& p : pt.packets) b += static_cast<double>(p.header.bytes().size() + p.payload.size());
  return b / static_cast<double>(std::max<std::size_t>(1, pt.packets.size()));
}

inline BenchRow base_row(const BenchConfig& cfg, const Point& pt, std::size_t r, std::uint32_t workers, std::uint64_t seed) {
  BenchRow row;
  row.mode = to_string(cfg.mode);
  row.r = r;
  row.t = pt.bundle.entry.params.t;
  row.l = pt.bundle.entry.params.l;
  row.rho = pt.bundle.entry.params.rho();
  row.workers = workers;
  row.seed = seed;
  row.packets = pt.packets.size();
  row.table_bytes = table_bytes(pt.bundle);
  return row;
}

inline void fill_throughput(BenchRow& row, const Point& pt, const ThroughputPoint& tp) {
  const auto& rep = tp.at_rate;
  row.offered_pps = tp.real_pps;
  row.real_pps = tp.real_pps;
  const double emitted = static_cast<double>(rep.stat("entry.emitted"));
  const double real = static_cast<double>(std::max<std::uint64_t>(1, rep.stat("entry.real")));
  row.pps = tp.real_pps * emitted / real;
  row.bytes_per_s = tp.real_pps * mean_wire_bytes(pt);
  row.plain_pps = tp.plain_pps;
  row.ratio = tp.plain_pps > 0 ? tp.real_pps / tp.plain_pps : 0;
  const auto d = summarize_delays(rep);
  row.mean_ns = d.mean;
  row.p50_ns = d.p50;
  row.p99_ns = d.p99;
  row.loss = static_cast<double>(real_lost(rep)) / static_cast<double>(std::max<std::size_t>(1, pt.packets.size()));
  row.conserved = rep.conserved();
  row.stats = rep.stats;
}

// ---------------------------------------------------------------------------
// Equivalence

// Rewrite variant: every allow rule also translates the destination address
// to 10.99.k.1 for rule k, NAT style.
struct NatPoint {
  PolicyTree tree{firewall::kHeaderBits};
  std::vector<std::optional<std::uint32_t>> translate;  // per rule
};

inline NatPoint nat_variant(std::span<const firewall::FirewallRule> rules) {
  NatPoint out;
  std::vector<Policy> ps;
  for (std::size_t k = 0; k < rules.size(); ++k) {
    const auto& r = rules[k];
    if (r.action == firewall::RuleAction::drop) {
      ps.push_back({r.match(), firewall::drop_action()});
      out.translate.push_back(std::nullopt);
      continue;
    }
    const std::uint32_t to = (10U << 24) | (99U << 16) | ((static_cast<std::uint32_t>(k) & 0xFF) << 8) | 1U;
    firewall::FiveTuple fields{0, to, 0, 0, 0};
    const BitString bits = firewall::encode_header(fields);
    TriStateString action(firewall::kHeaderBits);
    for (std::size_t i = 32; i < 64; ++i) action.set(i, bits.get(i) ? Symbol::one : Symbol::zero);
    ps.push_back({r.match(), std::move(action)});
    out.translate.push_back(to);
  }
  out.tree = rules.empty() ? PolicyTree(firewall::kHeaderBits) : build_chain(ps, firewall::kHeaderBits);
  return out;
}

// Expected output under first-match semantics, computed from the reference
// filter rather than from the tree.
inline std::optional<Packet> expected_output(const firewall::FilterResult& ref, const Packet& in,
                                             const std::vector<std::optional<std::uint32_t>>* translate) {
  if (ref.verdict == firewall::RuleAction::drop) return std::nullopt;
  Packet out = in;
  if (translate && ref.rule && (*translate)[*ref.rule]) {
    auto tuple = firewall::decode_header(in.header);
    tuple.dst = *(*translate)[*ref.rule];
    out.header = firewall::encode_header(tuple);
  }
  return out;
}

inline std::size_t count_mismatches(const fabric::RunReport& rep, const PolicyTree& tree, std::span<const Packet> packets,
                                    std::span<const firewall::FilterResult> ref,
                                    const std::vector<std::optional<std::uint32_t>>* translate) {
  std::size_t bad = 0;
  for (std::size_t k = 0; k < packets.size(); ++k) {
    const auto& rec = rep.packets[k];
    const auto want = expected_output(ref[k], packets[k], translate);
    const Packet alg = traverse(tree, packets[k]);
    const bool alg_agrees = want ? alg == *want : alg.header.is_zero();
    bool ok = alg_agrees;
    if (want) {
      ok = ok && rec.outcome == fabric::Outcome::forwarded && rec.output && *rec.output == *want;
    } else {
      ok = ok && rec.outcome == fabric::Outcome::dropped;
    }
    bad += ok ? 0 : 1;
  }
  return bad;
}

inline fabric::RunReport run_carrier(const BenchConfig& cfg, const SetupBundle& bundle, std::span<const Packet> packets,
                                     double rate, std::uint64_t seed) {
  if (cfg.carrier == Carrier::udp) {
    udp::LoopbackOptions opts;
    opts.entry_seed = seed;
    return udp::run_loopback(bundle, packets, opts);
  }
  fabric::Topology topo;
  topo.pacer.rate_pps = rate;
  topo.pacer.seed = seed;
  topo.entry_seed = seed;
  return fabric::run_topology(topo, bundle, packets);
}

inline BenchReport run_equivalence(const BenchConfig& cfg) {
  BenchReport rep;
  rep.mode = Mode::equivalence;
  const std::vector<std::size_t> counts = cfg.rules ? std::vector<std::size_t>{cfg.rules->size()} : cfg.rule_counts;
  std::uint64_t seed = cfg.seed;
  for (std::size_t r : counts) {
    for (std::uint32_t l : cfg.l_values) {
      for (double rho : cfg.rho_values) {
        ++seed;
        Point pt = random_point(cfg, r, cfg.t, l, rho, seed);
        const auto ref = firewall::reference_filter(pt.rules, pt.trace);
        const auto prof = fabric::ServiceProfile::reference();
        const double rate = 0.5 * capacity_estimate(prof, pt, 1);
        for (int variant = 0; variant < (cfg.nat_variant ? 2 : 1); ++variant) {
          BenchRow row = base_row(cfg, pt, pt.rules.size(), 1, seed);
          const PolicyTree* tree = &pt.tree;
          const SetupBundle* bundle = &pt.bundle;
          NatPoint nat;
          SetupBundle nat_bundle;
          if (variant == 1) {
            row.variant = "nat";
            nat = nat_variant(pt.rules);
            auto rng = RandomSource::seeded(seed ^ 0xA5A5);
            nat_bundle = global_setup(pt.bundle.entry.params, nat.tree, rng);
            tree = &nat.tree;
            bundle = &nat_bundle;
          }
          const auto run = run_carrier(cfg, *bundle, pt.packets, rate, seed);
          row.mismatches = count_mismatches(run, *tree, pt.packets, ref, variant == 1 ? &nat.translate : nullptr);
          row.offered_pps = cfg.carrier == Carrier::udp ? 0 : rate;
          row.loss = static_cast<double>(real_lost(run)) / static_cast<double>(pt.packets.size());
          row.conserved = cfg.carrier == Carrier::udp || run.conserved();
          const auto d = summarize_delays(run);
          row.mean_ns = d.mean;
          row.p50_ns = d.p50;
          row.p99_ns = d.p99;
          row.stats = run.stats;
          if (row.mismatches) {
            rep.failures.push_back(row.variant + " r=" + std::to_string(row.r) + ": " + std::to_string(row.mismatches) +
                                   " mismatches (reproduce with --seed " + std::to_string(cfg.seed) + ")");
          }
          if (!row.conserved) rep.failures.push_back("conservation violated at r=" + std::to_string(row.r));
          if (run.stat("client.dummies_discarded") != run.stat("entry.dummies")) {
            rep.failures.push_back("dummy count mismatch at r=" + std::to_string(row.r));
          }
          rep.rows.push_back(std::move(row));
        }
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Throughput, latency, l sweep, dummy rate

inline BenchReport run_throughput(const BenchConfig& cfg) {
  BenchReport rep;
  rep.mode = Mode::throughput;
  const std::vector<std::size_t> counts = cfg.rules ? std::vector<std::size_t>{cfg.rules->size()} : cfg.rule_counts;
  const std::uint32_t l = cfg.l_values.front();
  const double rho = cfg.rho_values.front();
  for (std::size_t r : counts) {
    const std::uint64_t seed = cfg.seed + r;
    const Point pt = controlled_point(cfg, r, l, rho, seed);
    const auto prof = profile_for(cfg, pt);
    const auto plain = plain_profile_for(cfg, pt);
    std::optional<double> plain_pps;
    for (const std::uint32_t w : cfg.workers) {
      auto tp = measure_throughput(cfg, pt, prof, plain, w, seed, !plain_pps.has_value());
      if (plain_pps) tp.plain_pps = *plain_pps;
      plain_pps = tp.plain_pps;
      BenchRow row = base_row(cfg, pt, r, w, seed);
      fill_throughput(row, pt, tp);
      if (!row.conserved) rep.failures.push_back("conservation violated at r=" + std::to_string(r));
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

inline BenchReport run_latency(const BenchConfig& cfg) {
  BenchReport rep;
  rep.mode = Mode::latency;
  const std::vector<std::size_t> counts = cfg.rules ? std::vector<std::size_t>{cfg.rules->size()} : cfg.rule_counts;
  const std::uint32_t l = cfg.l_values.front();
  const double rho = cfg.rho_values.front();
  const std::uint32_t w = cfg.workers.front();
  for (std::size_t r : counts) {
    const std::uint64_t seed = cfg.seed + r;
    const Point pt = controlled_point(cfg, r, l, rho, seed);
    const auto prof = profile_for(cfg, pt);
    const auto tp = measure_throughput(cfg, pt, prof, PlainProfile::reference(), w, seed, false);
    for (double f : cfg.loads) {
      const double rate = f * tp.real_pps;
      const auto run = fabric::run_topology(loss_topology(cfg, prof, w, rate, seed), pt.bundle, pt.packets);
      BenchRow row = base_row(cfg, pt, r, w, seed);
      row.load = f;
      row.offered_pps = rate;
      row.real_pps = rate;
      row.pps = rate * static_cast<double>(run.stat("entry.emitted")) /
                static_cast<double>(std::max<std::uint64_t>(1, run.stat("entry.real")));
      row.bytes_per_s = rate * mean_wire_bytes(pt);
      const auto d = summarize_delays(run);
      row.mean_ns = d.mean;
      row.p50_ns = d.p50;
      row.p99_ns = d.p99;
      row.loss = static_cast<double>(real_lost(run)) / static_cast<double>(pt.packets.size());
      row.conserved = run.conserved();
      row.stats = run.stats;
      if (!row.conserved) rep.failures.push_back("conservation violated at r=" + std::to_string(r));
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

inline BenchReport run_lsweep(const BenchConfig& cfg) {
  BenchReport rep;
  rep.mode = Mode::lsweep;
  const std::size_t r = cfg.rules ? cfg.rules->size() : cfg.rule_counts.front();
  const double rho = cfg.rho_values.front();
  const std::uint32_t w = cfg.workers.front();
  for (std::uint32_t l : cfg.l_values) {
    const std::uint64_t seed = cfg.seed + r;  // same workload for every l
    const Point pt = controlled_point(cfg, r, l, rho, seed);
    const auto prof = profile_for(cfg, pt);
    const auto plain = plain_profile_for(cfg, pt);
    const auto tp = measure_throughput(cfg, pt, prof, plain, w, seed);
    BenchRow row = base_row(cfg, pt, r, w, seed);
    fill_throughput(row, pt, tp);
    // Correctness across counter wraps at a comfortable load.
    const auto soak = run_carrier(cfg, pt.bundle, pt.packets, 0.5 * capacity_estimate(prof, pt, w), seed);
    const auto ref = firewall::reference_filter(pt.rules, pt.trace);
    row.mismatches = count_mismatches(soak, pt.tree, pt.packets, ref, nullptr);
    row.stats["soak.wraps"] = soak.stat("entry.wraps");
    if (row.mismatches) rep.failures.push_back("l=" + std::to_string(l) + ": " + std::to_string(row.mismatches) + " mismatches");
    if (!row.conserved || !soak.conserved()) rep.failures.push_back("conservation violated at l=" + std::to_string(l));
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

inline BenchReport run_dummyrate(const BenchConfig& cfg) {
  BenchReport rep;
  rep.mode = Mode::dummyrate;
  const std::size_t r = cfg.rules ? cfg.rules->size() : cfg.rule_counts.front();
  const std::uint32_t l = cfg.l_values.front();
  const std::uint32_t w = cfg.workers.front();
  const std::uint64_t seed = cfg.seed + r;
  // Per-emission costs do not depend on rho, so one calibration serves all.
  std::optional<fabric::ServiceProfile> prof;
  std::optional<double> plain_pps;
  for (double rho : cfg.rho_values) {
    const Point pt = controlled_point(cfg, r, l, rho, seed);
    if (!prof) prof = profile_for(cfg, pt);
    const auto plain = plain_profile_for(cfg, pt);
    auto tp = measure_throughput(cfg, pt, *prof, plain, w, seed, !plain_pps.has_value());
    if (plain_pps) tp.plain_pps = *plain_pps;
    plain_pps = tp.plain_pps;
    BenchRow row = base_row(cfg, pt, r, w, seed);
    fill_throughput(row, pt, tp);
    if (!row.conserved) rep.failures.push_back("conservation violated at rho=" + fmt_double(rho));
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

inline BenchReport run_bench(const BenchConfig& cfg) {
  cfg.validate();
  switch (cfg.mode) {
    case Mode::equivalence: return run_equivalence(cfg);
    case Mode::throughput: return run_throughput(cfg);
    case Mode::latency: return run_latency(cfg);
    case Mode::lsweep: return run_lsweep(cfg);
    case Mode::dummyrate: return run_dummyrate(cfg);
  }
  throw ConfigError("unknown mode");
}

}  // namespace splitbox::bench
