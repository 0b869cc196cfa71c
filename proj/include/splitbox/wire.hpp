#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "splitbox/bitstring.hpp"
#include "splitbox/bytes.hpp"
#include "splitbox/error.hpp"

namespace splitbox {

// Layout (big-endian), 22-byte header then body:
//   "SB" | version u8 | kind u8 | seq u64 | counter u32 | processor u8 |
//   flag u8 | body_len u32 | body
// Bodies: to_processor = x_r; to_client_xw = x_w header then payload;
// to_client_shares = alpha' then beta'. n-bit fields take ceil(n/8) bytes.
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kWireHeaderBytes = 22;
inline constexpr std::size_t kMaxDatagramBytes = 65507;
inline constexpr std::size_t kMaxWireBody = kMaxDatagramBytes - kWireHeaderBytes;

enum class MessageKind : std::uint8_t {
  to_processor = 1,
  to_client_xw = 2,
  to_client_shares = 3,
};

struct WireMessage {
  std::uint8_t version = kWireVersion;
  MessageKind kind = MessageKind::to_processor;
  std::uint64_t seq = 0;
  std::uint32_t counter_index = 0;
  std::uint8_t processor_id = 0;
  std::uint8_t flag_share = 0;
  std::vector<std::uint8_t> body;

  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

inline std::vector<std::uint8_t> encode(const WireMessage& m) {
  if (m.body.size() > kMaxWireBody) {
    throw EncodeError("wire body of " + std::to_string(m.body.size()) + " bytes exceeds " + std::to_string(kMaxWireBody));
  }
  if (m.flag_share > 1) throw EncodeError("flag share must be 0 or 1");
  ByteWriter w;
  w.raw("SB");
  w.u8(m.version);
  w.u8(static_cast<std::uint8_t>(m.kind));
  w.u64(m.seq);
  w.u32(m.counter_index);
  w.u8(m.processor_id);
  w.u8(m.flag_share);
  w.u32(static_cast<std::uint32_t>(m.body.size()));
  w.bytes(m.body);
  return std::move(w).take();
}

namespace detail {

inline void check_padding(std::span<const std::uint8_t> field, std::size_t n_bits) {
  const std::size_t rem = n_bits % 8;
  if (rem == 0 || field.empty()) return;
  const auto tail = static_cast<std::uint8_t>(0xFF >> rem);
  if (field.back() & tail) throw DecodeError(DecodeErrorCode::bad_field, "nonzero padding bits in n-bit field");
}

}  // namespace detail

// Parses one datagram. n_bits is the protocol header width used to check
// body lengths; never reads past the declared lengths.
inline WireMessage decode(std::span<const std::uint8_t> bytes, std::size_t n_bits) {
  ByteReader r(bytes);
  if (bytes.empty()) throw DecodeError(DecodeErrorCode::truncated, "empty datagram");
  const auto magic = r.bytes(2);
  if (magic[0] != 'S' || magic[1] != 'B') throw DecodeError(DecodeErrorCode::bad_magic, "expected 'SB'");
  WireMessage m;
  m.version = r.u8();
  if (m.version != kWireVersion) throw DecodeError(DecodeErrorCode::bad_version, "version " + std::to_string(m.version));
  const std::uint8_t kind = r.u8();
  if (kind < 1 || kind > 3) throw DecodeError(DecodeErrorCode::bad_kind, "kind " + std::to_string(kind));
  m.kind = static_cast<MessageKind>(kind);
  m.seq = r.u64();
  m.counter_index = r.u32();
  m.processor_id = r.u8();
  m.flag_share = r.u8();
  const std::uint32_t body_len = r.u32();
  if (m.counter_index == 0) throw DecodeError(DecodeErrorCode::bad_field, "counter index 0");
  if (m.flag_share > 1) throw DecodeError(DecodeErrorCode::bad_field, "flag share uses more than the low bit");
  const bool to_proc_or_shares = m.kind != MessageKind::to_client_xw;
  if (to_proc_or_shares ? m.processor_id == 0 : m.processor_id != 0) {
    throw DecodeError(DecodeErrorCode::bad_field, "processor id inconsistent with kind");
  }
  if (m.kind == MessageKind::to_client_xw && m.flag_share != 0) {
    throw DecodeError(DecodeErrorCode::bad_field, "x_w messages carry no flag share");
  }
  if (body_len > r.remaining()) {
    throw DecodeError(DecodeErrorCode::truncated, "body declares " + std::to_string(body_len) + " bytes, have " +
                                                      std::to_string(r.remaining()));
  }
  const std::size_t nb = bytes_for_bits(n_bits);
  const bool ok = m.kind == MessageKind::to_processor       ? body_len == nb
                  : m.kind == MessageKind::to_client_shares ? body_len == 2 * nb
                                                            : body_len >= nb;
  if (!ok) throw DecodeError(DecodeErrorCode::length_mismatch, "body length " + std::to_string(body_len) + " for kind");
  auto body = r.bytes(body_len);
  r.expect_end();
  detail::check_padding(body.subspan(0, nb), n_bits);
  if (m.kind == MessageKind::to_client_shares) detail::check_padding(body.subspan(nb, nb), n_bits);
  m.body.assign(body.begin(), body.end());
  return m;
}

}  // namespace splitbox
