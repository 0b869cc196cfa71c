#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "splitbox/bitstring.hpp"
#include "splitbox/bytes.hpp"
#include "splitbox/error.hpp"
#include "splitbox/nfmodel.hpp"
#include "splitbox/random.hpp"

namespace splitbox::firewall {

// srcIP(32) | dstIP(32) | protocol(8) | srcPort(16) | dstPort(16)
inline constexpr std::size_t kHeaderBits = 104;

struct FiveTuple {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::uint8_t proto = 0;
  std::uint16_t sport = 0;
  std::uint16_t dport = 0;
  friend bool operator==(const FiveTuple&, const FiveTuple&) = default;
};

inline BitString encode_header(const FiveTuple& t) {
  ByteWriter w;
  w.u32(t.src);
  w.u32(t.dst);
  w.u8(t.proto);
  w.u16(t.sport);
  w.u16(t.dport);
  return BitString::from_bytes(w.data(), kHeaderBits);
}

inline FiveTuple decode_header(const BitString& bits) {
  if (bits.size() != kHeaderBits) throw ContractViolation("decode_header: expected 104 bits");
  ByteReader r(bits.bytes());
  FiveTuple t;
  t.src = r.u32();
  t.dst = r.u32();
  t.proto = r.u8();
  t.sport = r.u16();
  t.dport = r.u16();
  return t;
}

inline std::string format_ip(std::uint32_t ip) {
  return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xFF) + "." + std::to_string((ip >> 8) & 0xFF) +
         "." + std::to_string(ip & 0xFF);
}

// ---------------------------------------------------------------------------
// Rules

enum class RuleAction : std::uint8_t { allow, drop };

struct FirewallRule {
  RuleAction action = RuleAction::allow;
  TriStateString src{32};
  TriStateString dst{32};
  TriStateString proto{8};
  TriStateString sport{16};
  TriStateString dport{16};

  TriStateString match() const {
    BitString care(kHeaderBits), value(kHeaderBits);
    std::size_t pos = 0;
    for (const TriStateString* f : {&src, &dst, &proto, &sport, &dport}) {
      for (std::size_t i = 0; i < f->size(); ++i, ++pos) {
        care.set(pos, f->care().get(i));
        value.set(pos, f->value().get(i));
      }
    }
    return {std::move(care), std::move(value)};
  }

  std::size_t fixed_bits() const { return match().fixed_count(); }

  friend bool operator==(const FirewallRule&, const FirewallRule&) = default;
};

class InexpressibleRangeError : public ParseError {
 public:
  InexpressibleRangeError(std::size_t line, const std::string& field, const std::string& text)
      : ParseError(line, "field " + field + ": range '" + text + "' is not an aligned power-of-two block"), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

namespace detail {

inline TriStateString fixed_bits_of(std::uint64_t value, std::size_t width) {
  TriStateString out(width);
  for (std::size_t i = 0; i < width; ++i) {
    out.set(i, ((value >> (width - 1 - i)) & 1U) ? Symbol::one : Symbol::zero);
  }
  return out;
}

inline std::optional<std::uint64_t> parse_uint(std::string_view s, std::uint64_t max) {
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || v > max) return std::nullopt;
  return v;
}

// [lo, hi] as a tri-state block, if it is aligned and power-of-two sized.
inline std::optional<TriStateString> aligned_block(std::uint64_t lo, std::uint64_t hi, std::size_t width) {
  if (hi < lo) return std::nullopt;
  const std::uint64_t size = hi - lo + 1;
  if ((size & (size - 1)) != 0 || lo % size != 0) return std::nullopt;
  std::size_t free_bits = 0;
  while ((std::uint64_t{1} << free_bits) < size) ++free_bits;
  TriStateString out = fixed_bits_of(lo, width);
  for (std::size_t i = width - free_bits; i < width; ++i) out.set(i, Symbol::star);
  return out;
}

inline std::optional<std::uint32_t> parse_quad(std::string_view s) {
  std::uint32_t ip = 0;
  int parts = 0;
  while (parts < 4) {
    const auto dot = s.find('.');
    const auto part = s.substr(0, dot);
    auto v = parse_uint(part, 255);
    if (!v) return std::nullopt;
    ip = (ip << 8) | static_cast<std::uint32_t>(*v);
    ++parts;
    if (dot == std::string_view::npos) break;
    s.remove_prefix(dot + 1);
  }
  if (parts != 4 || s.find('.') != std::string_view::npos) return std::nullopt;
  return ip;
}

inline TriStateString parse_ip_pattern(const std::string& text, const std::string& field, std::size_t line) {
  if (text == "*") return TriStateString(32);
  if (const auto dash = text.find('-'); dash != std::string::npos) {
    auto lo = parse_quad(std::string_view(text).substr(0, dash));
    auto hi = parse_quad(std::string_view(text).substr(dash + 1));
    if (!lo || !hi) throw ParseError(line, "field " + field + ": bad address range '" + text + "'");
    if (auto block = aligned_block(*lo, *hi, 32)) return *block;
    throw InexpressibleRangeError(line, field, text);
  }
  std::string_view body = text;
  std::size_t prefix = 32;
  if (const auto slash = body.find('/'); slash != std::string_view::npos) {
    auto k = parse_uint(body.substr(slash + 1), 32);
    if (!k) throw ParseError(line, "field " + field + ": bad prefix length in '" + text + "'");
    prefix = static_cast<std::size_t>(*k);
    body = body.substr(0, slash);
  }
  TriStateString out(32);
  std::size_t octet = 0;
  while (true) {
    const auto dot = body.find('.');
    const auto part = body.substr(0, dot);
    if (octet >= 4) throw ParseError(line, "field " + field + ": too many octets in '" + text + "'");
    if (part != "*") {
      auto v = parse_uint(part, 255);
      if (!v) throw ParseError(line, "field " + field + ": bad octet '" + std::string(part) + "'");
      for (std::size_t b = 0; b < 8; ++b) {
        out.set(8 * octet + b, ((*v >> (7 - b)) & 1U) ? Symbol::one : Symbol::zero);
      }
    }
    ++octet;
    if (dot == std::string_view::npos) break;
    body.remove_prefix(dot + 1);
  }
  if (octet != 4) throw ParseError(line, "field " + field + ": expected four octets in '" + text + "'");
  for (std::size_t i = prefix; i < 32; ++i) out.set(i, Symbol::star);
  return out;
}

inline TriStateString parse_int_pattern(const std::string& text, std::size_t width, const std::string& field,
                                        std::size_t line) {
  if (text == "*") return TriStateString(width);
  const std::uint64_t max = (std::uint64_t{1} << width) - 1;
  if (const auto dash = text.find('-'); dash != std::string::npos) {
    auto lo = parse_uint(std::string_view(text).substr(0, dash), max);
    auto hi = parse_uint(std::string_view(text).substr(dash + 1), max);
    if (!lo || !hi) throw ParseError(line, "field " + field + ": bad range '" + text + "'");
    if (auto block = aligned_block(*lo, *hi, width)) return *block;
    throw InexpressibleRangeError(line, field, text);
  }
  auto v = parse_uint(text, max);
  if (!v) throw ParseError(line, "field " + field + ": bad value '" + text + "'");
  return fixed_bits_of(*v, width);
}

}  // namespace detail

// One rule per line:
//   allow|drop src=<pat> dst=<pat> proto=<u8|*> sport=<u16|*> dport=<u16|*>
// Omitted fields are wildcards. Address patterns: '*', dotted quads with '*'
// octets, optional /k prefix, or an aligned a.b.c.d-e.f.g.h block. Ports
// also accept aligned lo-hi blocks.
inline std::vector<FirewallRule> parse_rules(std::string_view text) {
  std::vector<FirewallRule> rules;
  std::istringstream is{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    auto toks = splitbox::detail::split_ws(splitbox::detail::strip_comment(raw));
    if (toks.empty()) continue;
    FirewallRule r;
    if (toks[0] == "allow") {
      r.action = RuleAction::allow;
    } else if (toks[0] == "drop") {
      r.action = RuleAction::drop;
    } else {
      throw ParseError(line, "rule must start with allow or drop, got '" + toks[0] + "'");
    }
    std::array<bool, 5> seen{};
    for (std::size_t k = 1; k < toks.size(); ++k) {
      const auto eq = toks[k].find('=');
      if (eq == std::string::npos) throw ParseError(line, "expected key=value, got '" + toks[k] + "'");
      const std::string key = toks[k].substr(0, eq);
      const std::string val = toks[k].substr(eq + 1);
      std::size_t slot = 0;
      if (key == "src") {
        r.src = detail::parse_ip_pattern(val, key, line);
        slot = 0;
      } else if (key == "dst") {
        r.dst = detail::parse_ip_pattern(val, key, line);
        slot = 1;
      } else if (key == "proto") {
        r.proto = detail::parse_int_pattern(val, 8, key, line);
        slot = 2;
      } else if (key == "sport") {
        r.sport = detail::parse_int_pattern(val, 16, key, line);
        slot = 3;
      } else if (key == "dport") {
        r.dport = detail::parse_int_pattern(val, 16, key, line);
        slot = 4;
      } else {
        throw ParseError(line, "unknown field '" + key + "'");
      }
      if (seen[slot]) throw ParseError(line, "field '" + key + "' given twice");
      seen[slot] = true;
    }
    rules.push_back(std::move(r));
  }
  return rules;
}

namespace detail {

inline std::string format_ip_pattern(const TriStateString& p) {
  if (p.is_all_star()) return "*";
  std::string out;
  for (std::size_t o = 0; o < 4; ++o) {
    if (o) out += '.';
    std::uint32_t v = 0;
    bool any = false, all = true;
    for (std::size_t b = 0; b < 8; ++b) {
      const auto s = p.at(8 * o + b);
      any |= s != Symbol::star;
      all &= s != Symbol::star;
      v = (v << 1) | (s == Symbol::one ? 1U : 0U);
    }
    if (!any) {
      out += '*';
    } else if (all) {
      out += std::to_string(v);
    } else {
      return "";  // not expressible per octet; caller falls back
    }
  }
  return out;
}

inline std::string format_int_pattern(const TriStateString& p) {
  if (p.is_all_star()) return "*";
  std::uint64_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto s = p.at(i);
    lo = (lo << 1) | (s == Symbol::one ? 1U : 0U);
    hi = (hi << 1) | (s == Symbol::zero ? 0U : 1U);
  }
  return lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
}

// Fixed high bits then stars: prefix form.
inline std::optional<std::size_t> prefix_length(const TriStateString& p) {
  std::size_t k = 0;
  while (k < p.size() && p.at(k) != Symbol::star) ++k;
  for (std::size_t i = k; i < p.size(); ++i) {
    if (p.at(i) != Symbol::star) return std::nullopt;
  }
  return k;
}

inline std::string format_address(const TriStateString& p) {
  if (auto s = format_ip_pattern(p); !s.empty()) return s;
  if (auto k = prefix_length(p)) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 32; ++i) v = (v << 1) | (p.at(i) == Symbol::one ? 1U : 0U);
    return format_ip(v) + "/" + std::to_string(*k);
  }
  throw ContractViolation("address pattern has no DSL form");
}

}  // namespace detail

inline std::string format_rule(const FirewallRule& r) {
  return std::string(r.action == RuleAction::allow ? "allow" : "drop") + " src=" + detail::format_address(r.src) +
         " dst=" + detail::format_address(r.dst) + " proto=" + detail::format_int_pattern(r.proto) +
         " sport=" + detail::format_int_pattern(r.sport) + " dport=" + detail::format_int_pattern(r.dport);
}

inline std::string format_rules(std::span<const FirewallRule> rules) {
  std::string out;
  for (const auto& r : rules) out += format_rule(r) + "\n";
  return out;
}

// Drop is the all-zero rewrite with full projection; allow is the identity.
inline TriStateString drop_action(std::size_t n = kHeaderBits) { return TriStateString::exact(BitString(n)); }

inline PolicyTree compile_rules(std::span<const FirewallRule> rules) {
  if (rules.empty()) return PolicyTree(kHeaderBits);
  std::vector<Policy> policies;
  policies.reserve(rules.size());
  for (const auto& r : rules) {
    policies.push_back({r.match(), r.action == RuleAction::drop ? drop_action() : TriStateString::stars(kHeaderBits)});
  }
  PolicyTree tree = build_chain(policies, kHeaderBits);
  if (auto diags = validate_tree(tree); !diags.empty()) {
    throw InvalidTreeError("compiled rules are not evaluable privately: " + diags.front().message);
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Reference filter

struct FilterResult {
  RuleAction verdict = RuleAction::allow;
  std::size_t attempts = 0;
  std::optional<std::size_t> rule;  // 0-based index of the matching rule
};

inline FilterResult filter_one(std::span<const TriStateString> matches, std::span<const FirewallRule> rules,
                               const BitString& header) {
  FilterResult res;
  for (std::size_t k = 0; k < matches.size(); ++k) {
    ++res.attempts;
    if (tri_match(header, matches[k])) {
      res.verdict = rules[k].action;
      res.rule = k;
      return res;
    }
  }
  return res;
}

// Plaintext first-match filter with an implicit trailing allow.
class ReferenceFilter {
 public:
  explicit ReferenceFilter(std::vector<FirewallRule> rules) : rules_(std::move(rules)) {
    for (const auto& r : rules_) matches_.push_back(r.match());
  }
  FilterResult operator()(const BitString& header) const { return filter_one(matches_, rules_, header); }
  const std::vector<FirewallRule>& rules() const noexcept { return rules_; }

 private:
  std::vector<FirewallRule> rules_;
  std::vector<TriStateString> matches_;
};

// ---------------------------------------------------------------------------
// Traces

struct TraceRecord {
  FiveTuple tuple;
  std::uint32_t payload_len = 0;
  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
  std::vector<TraceRecord> records;
  friend bool operator==(const Trace&, const Trace&) = default;
};

inline std::vector<FilterResult> reference_filter(std::span<const FirewallRule> rules, const Trace& trace) {
  const ReferenceFilter f(std::vector<FirewallRule>(rules.begin(), rules.end()));
  std::vector<FilterResult> out;
  out.reserve(trace.records.size());
  for (const auto& rec : trace.records) out.push_back(f(encode_header(rec.tuple)));
  return out;
}

// Payload bytes are a deterministic function of the record position.
inline Packet to_packet(const TraceRecord& rec, std::size_t position) {
  Packet p;
  p.header = encode_header(rec.tuple);
  p.payload.resize(rec.payload_len);
  std::uint64_t x = 0x9E3779B97F4A7C15ULL * (position + 1);
  for (auto& b : p.payload) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 29;
    b = static_cast<std::uint8_t>(x);
  }
  return p;
}

inline std::vector<Packet> to_packets(const Trace& trace) {
  std::vector<Packet> out;
  out.reserve(trace.records.size());
  for (std::size_t k = 0; k < trace.records.size(); ++k) out.push_back(to_packet(trace.records[k], k));
  return out;
}

enum class SizeModel : std::uint8_t { fixed, uniform, bimodal };

// Defaults are arbitrary desk-scale choices: mostly TCP, a few hundred
// hosts, bimodal sizes (ACK-sized and near-MTU) averaging about 1 kB.
struct TraceSpec {
  std::size_t count = 10'000;
  std::uint32_t mean_payload = 1024;
  SizeModel sizes = SizeModel::bimodal;
  std::uint32_t sources = 256;
  std::uint32_t destinations = 64;
  bool controlled = false;  // all sources in 10.0.0.0/8 and TCP, see make_controlled_workload
};

namespace detail {

inline std::uint32_t sample_payload(const TraceSpec& spec, RandomSource& rng) {
  const std::uint32_t mean = spec.mean_payload;
  switch (spec.sizes) {
    case SizeModel::fixed: return mean;
    case SizeModel::uniform: return static_cast<std::uint32_t>(rng.uniform(0, 2ULL * mean));
    case SizeModel::bimodal: {
      constexpr std::uint32_t small_lo = 0, small_hi = 80, large_lo = 1200, large_hi = 1460;
      constexpr double small_mean = (small_lo + small_hi) / 2.0, large_mean = (large_lo + large_hi) / 2.0;
      if (mean <= small_mean || mean >= large_mean) return static_cast<std::uint32_t>(rng.uniform(0, 2ULL * mean));
      const double p_small = (large_mean - mean) / (large_mean - small_mean);
      return rng.bernoulli(p_small) ? static_cast<std::uint32_t>(rng.uniform(small_lo, small_hi))
                                    : static_cast<std::uint32_t>(rng.uniform(large_lo, large_hi));
    }
  }
  return mean;
}

}  // namespace detail

// Never produces an all-zero header.
inline Trace generate_trace(const TraceSpec& spec, RandomSource& rng) {
  static constexpr std::array<std::uint16_t, 8> common_ports{80, 443, 22, 53, 25, 8080, 123, 3306};
  std::vector<std::uint32_t> sources, destinations;
  for (std::uint32_t k = 0; k < std::max<std::uint32_t>(1, spec.sources); ++k) {
    const bool internal = spec.controlled || rng.bernoulli(0.5);
    const auto low = static_cast<std::uint32_t>(rng.uniform(1, 0xFFFFFF));
    sources.push_back(internal ? (10U << 24) | low : static_cast<std::uint32_t>(rng.uniform(0x01000000, 0xDFFFFFFF)));
  }
  for (std::uint32_t k = 0; k < std::max<std::uint32_t>(1, spec.destinations); ++k) {
    destinations.push_back((192U << 24) | (168U << 16) | static_cast<std::uint32_t>(rng.uniform(1, 0xFFFF)));
  }
  Trace trace;
  trace.records.reserve(spec.count);
  while (trace.records.size() < spec.count) {
    TraceRecord rec;
    rec.tuple.src = sources[rng.uniform(0, sources.size() - 1)];
    rec.tuple.dst = destinations[rng.uniform(0, destinations.size() - 1)];
    rec.tuple.proto = spec.controlled || rng.bernoulli(0.85) ? 6 : 17;
    rec.tuple.sport = static_cast<std::uint16_t>(rng.uniform(1024, 65535));
    rec.tuple.dport = rng.bernoulli(0.8) ? common_ports[rng.uniform(0, common_ports.size() - 1)]
                                         : static_cast<std::uint16_t>(rng.uniform(1, 65535));
    rec.payload_len = detail::sample_payload(spec, rng);
    if (encode_header(rec.tuple).is_zero()) continue;
    trace.records.push_back(rec);
  }
  return trace;
}

struct Workload {
  std::vector<FirewallRule> rules;
  Trace trace;
};

// Every packet makes exactly r match attempts: r-1 drop rules that no trace
// packet can match (UDP from 172.16.0.0/12) followed by an allow rule that
// every trace packet matches (TCP from 10.0.0.0/8).
inline Workload make_controlled_workload(std::size_t r, TraceSpec spec, RandomSource& rng) {
  if (r == 0) throw ContractViolation("controlled workload needs r >= 1");
  spec.controlled = true;
  Workload w;
  for (std::size_t k = 0; k + 1 < r; ++k) {
    FirewallRule rule;
    rule.action = RuleAction::drop;
    const std::uint32_t net = (172U << 24) | (16U << 16) | (static_cast<std::uint32_t>(k % 4096) << 8);
    rule.src = detail::fixed_bits_of(net >> 8, 24);
    rule.src = TriStateString::from_text(rule.src.to_string() + std::string(8, '*'));
    rule.proto = detail::fixed_bits_of(17, 8);
    rule.dport = detail::fixed_bits_of(rng.uniform(1, 65535), 16);
    w.rules.push_back(std::move(rule));
  }
  FirewallRule allow;
  allow.action = RuleAction::allow;
  allow.src = TriStateString::from_text("00001010" + std::string(24, '*'));
  allow.proto = detail::fixed_bits_of(6, 8);
  w.rules.push_back(std::move(allow));
  w.trace = generate_trace(spec, rng);
  return w;
}

// Random ruleset whose rules are carved out of trace tuples so that a fair
// share of packets hit something. Every rule fixes at least min_fixed bits.
inline std::vector<FirewallRule> random_ruleset(std::size_t count, const Trace& trace, RandomSource& rng,
                                                std::size_t min_fixed = 16) {
  static constexpr std::array<std::size_t, 5> prefixes{0, 8, 16, 24, 32};
  std::vector<FirewallRule> rules;
  while (rules.size() < count) {
    const FiveTuple base = trace.records.empty() ? FiveTuple{static_cast<std::uint32_t>(rng.next_u64()),
                                                             static_cast<std::uint32_t>(rng.next_u64()), 6, 0, 80}
                                                 : trace.records[rng.uniform(0, trace.records.size() - 1)].tuple;
    FirewallRule r;
    r.action = rng.bernoulli(0.5) ? RuleAction::drop : RuleAction::allow;
    auto prefix_of = [&](std::uint32_t ip) {
      const std::size_t k = prefixes[rng.uniform(0, prefixes.size() - 1)];
      TriStateString p = detail::fixed_bits_of(ip, 32);
      for (std::size_t i = k; i < 32; ++i) p.set(i, Symbol::star);
      return p;
    };
    r.src = prefix_of(base.src);
    r.dst = prefix_of(base.dst);
    if (rng.bernoulli(0.5)) r.proto = detail::fixed_bits_of(base.proto, 8);
    if (rng.bernoulli(0.1)) r.sport = detail::fixed_bits_of(base.sport, 16);
    if (rng.bernoulli(0.5)) {
      r.dport = detail::fixed_bits_of(base.dport, 16);
      if (rng.bernoulli(0.2)) {
        for (std::size_t i = 12; i < 16; ++i) r.dport.set(i, Symbol::star);  // aligned 16-port block
      }
    }
    if (r.fixed_bits() < min_fixed) continue;
    rules.push_back(std::move(r));
  }
  return rules;
}

// Optional optimization: move frequently matching rules earlier. Only
// adjacent rules that cannot both match a packet (or share a verdict) are
// swapped, so first-match semantics are preserved.
inline std::vector<FirewallRule> reorder_by_frequency(std::vector<FirewallRule> rules, const Trace& sample) {
  const auto results = reference_filter(rules, sample);
  std::vector<std::size_t> hits(rules.size(), 0);
  for (const auto& r : results) {
    if (r.rule) ++hits[*r.rule];
  }
  std::vector<TriStateString> matches;
  for (const auto& r : rules) matches.push_back(r.match());
  auto disjoint = [](const TriStateString& a, const TriStateString& b) {
    return !((a.care() & b.care()) & (a.value() ^ b.value())).is_zero();
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k + 1 < rules.size(); ++k) {
      if (hits[k + 1] <= hits[k]) continue;
      if (!disjoint(matches[k], matches[k + 1]) && rules[k].action != rules[k + 1].action) continue;
      std::swap(rules[k], rules[k + 1]);
      std::swap(hits[k], hits[k + 1]);
      std::swap(matches[k], matches[k + 1]);
      changed = true;
    }
  }
  return rules;
}

// ---------------------------------------------------------------------------
// Trace file: "SBTR" | version u16 | count u32 | records of
// src u32, dst u32, proto u8, sport u16, dport u16, payload_len u32.

inline constexpr std::uint16_t kTraceVersion = 1;
inline constexpr std::size_t kTraceRecordBytes = 17;

inline std::vector<std::uint8_t> encode_trace(const Trace& trace) {
  ByteWriter w;
  w.raw("SBTR");
  w.u16(kTraceVersion);
  w.u32(static_cast<std::uint32_t>(trace.records.size()));
  for (const auto& r : trace.records) {
    w.u32(r.tuple.src);
    w.u32(r.tuple.dst);
    w.u8(r.tuple.proto);
    w.u16(r.tuple.sport);
    w.u16(r.tuple.dport);
    w.u32(r.payload_len);
  }
  return std::move(w).take();
}

inline Trace decode_trace(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), "SBTR")) throw DecodeError(DecodeErrorCode::bad_magic, "expected 'SBTR'");
  if (r.u16() != kTraceVersion) throw DecodeError(DecodeErrorCode::bad_version, "unsupported trace version");
  const std::uint32_t count = r.u32();
  if (r.remaining() != static_cast<std::size_t>(count) * kTraceRecordBytes) {
    throw DecodeError(DecodeErrorCode::length_mismatch, "record area does not match count");
  }
  Trace t;
  t.records.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    TraceRecord rec;
    rec.tuple.src = r.u32();
    rec.tuple.dst = r.u32();
    rec.tuple.proto = r.u8();
    rec.tuple.sport = r.u16();
    rec.tuple.dport = r.u16();
    rec.payload_len = r.u32();
    t.records.push_back(rec);
  }
  return t;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_file_text(const std::string& path) {
  auto b = read_file_bytes(path);
  return {b.begin(), b.end()};
}

}  // namespace splitbox::firewall
