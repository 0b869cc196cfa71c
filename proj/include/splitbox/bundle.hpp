#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "splitbox/bytes.hpp"
#include "splitbox/error.hpp"
#include "splitbox/protocol.hpp"

namespace splitbox {

// Per-role configuration container. Layout is documented in
// docs/config-bundle.md; all integers big-endian.
//   "SPBX" | version u16 | role u8 | params (7 x u32) | section_len u32 | section
inline constexpr std::uint16_t kBundleVersion = 1;

enum class BundleRole : std::uint8_t { entry = 1, processor = 2, client = 3 };

namespace detail {

inline void put_params(ByteWriter& w, const ProtocolParams& p) {
  for (std::uint32_t v : {p.n, p.l, p.t, p.q, p.delta_min, p.rho_num, p.rho_den}) w.u32(v);
}

inline ProtocolParams get_params(ByteReader& r) {
  ProtocolParams p;
  p.n = r.u32();
  p.l = r.u32();
  p.t = r.u32();
  p.q = r.u32();
  p.delta_min = r.u32();
  p.rho_num = r.u32();
  p.rho_den = r.u32();
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw DecodeError(DecodeErrorCode::bad_field, std::string("params: ") + e.what());
  }
  return p;
}

// l*n bits back to back, one padding run at the end.
inline void put_blinds(ByteWriter& w, const BlindTable& t) {
  const std::size_t n = t.bits();
  BitString all(static_cast<std::size_t>(t.size()) * n);
  std::size_t pos = 0;
  for (const auto& b : t.blinds()) {
    for (std::size_t k = 0; k < n; ++k) all.set(pos++, b.get(k));
  }
  w.bytes(all.bytes());
}

inline BlindTable get_blinds(ByteReader& r, const ProtocolParams& p) {
  const std::size_t total = static_cast<std::size_t>(p.l) * p.n;
  BitString all = [&] {
    try {
      return BitString::from_bytes(r.bytes(bytes_for_bits(total)), total);
    } catch (const ContractViolation&) {
      throw DecodeError(DecodeErrorCode::bad_field, "blind table padding bits set");
    }
  }();
  std::vector<BitString> blinds;
  blinds.reserve(p.l);
  for (std::size_t i = 0; i < p.l; ++i) {
    BitString b(p.n);
    for (std::size_t k = 0; k < p.n; ++k) b.set(k, all.get(i * p.n + k));
    blinds.push_back(std::move(b));
  }
  return BlindTable(p.n, std::move(blinds));
}

inline BitString get_nbits(ByteReader& r, std::size_t n) {
  try {
    return BitString::from_bytes(r.bytes(bytes_for_bits(n)), n);
  } catch (const ContractViolation&) {
    throw DecodeError(DecodeErrorCode::bad_field, "padding bits set in n-bit field");
  }
}

inline std::vector<std::uint8_t> frame(BundleRole role, const ProtocolParams& p, ByteWriter&& section) {
  ByteWriter w;
  w.raw("SPBX");
  w.u16(kBundleVersion);
  w.u8(static_cast<std::uint8_t>(role));
  put_params(w, p);
  w.u32(static_cast<std::uint32_t>(section.size()));
  w.bytes(section.data());
  return std::move(w).take();
}

struct Framed {
  BundleRole role;
  ProtocolParams params;
  std::span<const std::uint8_t> section;
};

inline Framed unframe(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), "SPBX")) throw DecodeError(DecodeErrorCode::bad_magic, "expected 'SPBX'");
  if (r.u16() != kBundleVersion) throw DecodeError(DecodeErrorCode::bad_version, "unsupported bundle version");
  const std::uint8_t role = r.u8();
  if (role < 1 || role > 3) throw DecodeError(DecodeErrorCode::bad_kind, "role " + std::to_string(role));
  Framed f{static_cast<BundleRole>(role), get_params(r), {}};
  const std::uint32_t len = r.u32();
  if (len != r.remaining()) {
    throw DecodeError(len > r.remaining() ? DecodeErrorCode::truncated : DecodeErrorCode::trailing_bytes,
                      "section length " + std::to_string(len) + ", have " + std::to_string(r.remaining()));
  }
  f.section = r.bytes(len);
  return f;
}

inline Framed unframe_as(std::span<const std::uint8_t> bytes, BundleRole want) {
  Framed f = unframe(bytes);
  if (f.role != want) throw DecodeError(DecodeErrorCode::bad_kind, "bundle is for a different role");
  return f;
}

}  // namespace detail

// Entry section: blind table.
inline std::vector<std::uint8_t> encode_bundle(const EntryConfig& c) {
  ByteWriter s;
  detail::put_blinds(s, c.blinds);
  return detail::frame(BundleRole::entry, c.params, std::move(s));
}

// Processor section: id u8 | tree | projections | digests | shares.
inline std::vector<std::uint8_t> encode_bundle(const ProcessorConfig& c) {
  ByteWriter s;
  s.u8(c.id);
  s.u32(static_cast<std::uint32_t>(c.tree.nodes.size()));
  for (const auto& nd : c.tree.nodes) {
    s.u32(nd.action);
    s.u8(nd.branch ? 1 : 0);
    if (nd.branch) {
      s.u32(nd.branch->match);
      s.u32(nd.branch->on_miss);
      s.u32(nd.branch->on_match);
    }
  }
  s.u32(static_cast<std::uint32_t>(c.projections.size()));
  for (const auto& p : c.projections) s.bytes(p.bytes());
  s.bytes(c.table.raw());
  s.u32(static_cast<std::uint32_t>(c.shares.size()));
  for (const auto& sh : c.shares) {
    s.u32(sh.action);
    s.bytes(sh.alpha.bytes());
    s.bytes(sh.beta.bytes());
  }
  return detail::frame(BundleRole::processor, c.params, std::move(s));
}

// Client section: blind table | match_count u32 | action_count u32 |
// has_seed u8 [| seed u64].
inline std::vector<std::uint8_t> encode_bundle(const ClientConfig& c) {
  ByteWriter s;
  detail::put_blinds(s, c.blinds);
  s.u32(c.match_count);
  s.u32(c.action_count);
  s.u8(c.seed ? 1 : 0);
  if (c.seed) s.u64(*c.seed);
  return detail::frame(BundleRole::client, c.params, std::move(s));
}

inline BundleRole bundle_role(std::span<const std::uint8_t> bytes) { return detail::unframe(bytes).role; }

inline EntryConfig decode_entry_bundle(std::span<const std::uint8_t> bytes) {
  auto f = detail::unframe_as(bytes, BundleRole::entry);
  ByteReader r(f.section);
  EntryConfig c{f.params, detail::get_blinds(r, f.params)};
  r.expect_end();
  return c;
}

inline ProcessorConfig decode_processor_bundle(std::span<const std::uint8_t> bytes) {
  auto f = detail::unframe_as(bytes, BundleRole::processor);
  const std::size_t n = f.params.n;
  ByteReader r(f.section);
  ProcessorConfig c;
  c.params = f.params;
  c.id = r.u8();
  if (c.id < 1 || c.id > f.params.t) throw DecodeError(DecodeErrorCode::bad_field, "processor id outside [1, t]");
  const std::uint32_t node_count = r.u32();
  if (node_count == 0 || node_count > r.remaining() / 5) throw DecodeError(DecodeErrorCode::bad_field, "node count");
  c.tree.nodes.reserve(node_count);
  for (std::uint32_t k = 0; k < node_count; ++k) {
    PrivateNode nd;
    nd.action = r.u32();
    const std::uint8_t has = r.u8();
    if (has > 1) throw DecodeError(DecodeErrorCode::bad_field, "branch flag");
    if (has) {
      PrivateBranch b;
      b.match = r.u32();
      b.on_miss = r.u32();
      b.on_match = r.u32();
      if (b.on_miss >= node_count || b.on_match >= node_count) {
        throw DecodeError(DecodeErrorCode::bad_field, "edge to unknown node");
      }
      nd.branch = b;
    }
    c.tree.nodes.push_back(nd);
  }
  const std::uint32_t match_count = r.u32();
  if (match_count > r.remaining() / std::max<std::size_t>(1, bytes_for_bits(n))) {
    throw DecodeError(DecodeErrorCode::truncated, "match count");
  }
  for (std::uint32_t j = 0; j < match_count; ++j) c.projections.push_back(detail::get_nbits(r, n));
  const std::size_t table_bytes = static_cast<std::size_t>(f.params.l) * match_count * (f.params.q / 8);
  if (table_bytes > r.remaining()) throw DecodeError(DecodeErrorCode::truncated, "digest table");
  c.table = HashedMatchTable(f.params.l, match_count, f.params.q);
  const auto raw = r.bytes(c.table.raw().size());
  std::copy(raw.begin(), raw.end(), c.table.mutable_raw().begin());
  const std::uint32_t action_count = r.u32();
  if (action_count > r.remaining() / (4 + 2 * bytes_for_bits(n))) throw DecodeError(DecodeErrorCode::truncated, "action count");
  for (std::uint32_t a = 0; a < action_count; ++a) {
    ActionShares sh;
    sh.processor = c.id;
    sh.action = r.u32();
    if (sh.action != a) throw DecodeError(DecodeErrorCode::bad_field, "share list not keyed in action order");
    sh.alpha = detail::get_nbits(r, n);
    sh.beta = detail::get_nbits(r, n);
    c.shares.push_back(std::move(sh));
  }
  r.expect_end();
  for (const auto& nd : c.tree.nodes) {
    if (nd.action >= action_count) throw DecodeError(DecodeErrorCode::bad_field, "node references unknown action");
    if (nd.branch && nd.branch->match >= match_count) {
      throw DecodeError(DecodeErrorCode::bad_field, "node references unknown match");
    }
  }
  return c;
}

inline ClientConfig decode_client_bundle(std::span<const std::uint8_t> bytes) {
  auto f = detail::unframe_as(bytes, BundleRole::client);
  ByteReader r(f.section);
  ClientConfig c;
  c.params = f.params;
  c.blinds = detail::get_blinds(r, f.params);
  c.match_count = r.u32();
  c.action_count = r.u32();
  const std::uint8_t has_seed = r.u8();
  if (has_seed > 1) throw DecodeError(DecodeErrorCode::bad_field, "seed flag");
  if (has_seed) c.seed = r.u64();
  r.expect_end();
  return c;
}

}  // namespace splitbox
