#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splitbox/error.hpp"

namespace splitbox {

inline constexpr std::size_t bytes_for_bits(std::size_t nbits) { return (nbits + 7) / 8; }

// Fixed-length binary string. Bit 0 is the most significant bit of byte 0;
// bits past size() in the last byte are always zero.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t nbits) : nbits_(nbits), bytes_(bytes_for_bits(nbits), 0) {}

  static BitString from_text(std::string_view text) {
    BitString out(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '1') {
        out.set(i, true);
      } else if (text[i] != '0') {
        throw ContractViolation("bit string text may only contain 0/1: '" + std::string(text) + "'");
      }
    }
    return out;
  }

  // Takes ceil(nbits/8) bytes; padding bits must be zero.
  static BitString from_bytes(std::span<const std::uint8_t> bytes, std::size_t nbits) {
    if (bytes.size() != bytes_for_bits(nbits)) {
      throw ContractViolation("byte count does not match bit length");
    }
    BitString out(nbits);
    std::copy(bytes.begin(), bytes.end(), out.bytes_.begin());
    if (!out.bytes_.empty() && out.bytes_.back() != (out.bytes_.back() & out.tail_mask())) {
      throw ContractViolation("nonzero padding bits");
    }
    return out;
  }

  std::size_t size() const noexcept { return nbits_; }
  bool empty() const noexcept { return nbits_ == 0; }

  bool get(std::size_t i) const {
    check_index(i);
    return (bytes_[i / 8] >> (7 - i % 8)) & 1U;
  }

  void set(std::size_t i, bool value) {
    check_index(i);
    const auto bit = static_cast<std::uint8_t>(0x80U >> (i % 8));
    if (value) {
      bytes_[i / 8] |= bit;
    } else {
      bytes_[i / 8] &= static_cast<std::uint8_t>(~bit);
    }
  }

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

  // Mutable access for bulk fills; callers must call clear_padding() after.
  std::span<std::uint8_t> mutable_bytes() noexcept { return bytes_; }
  void clear_padding() noexcept {
    if (!bytes_.empty()) bytes_.back() &= tail_mask();
  }

  std::size_t weight() const noexcept {
    std::size_t w = 0;
    for (auto b : bytes_) w += static_cast<std::size_t>(std::popcount(b));
    return w;
  }

  bool is_zero() const noexcept {
    return std::all_of(bytes_.begin(), bytes_.end(), [](std::uint8_t b) { return b == 0; });
  }

  // x(0, len)
  BitString prefix(std::size_t len) const {
    if (len > nbits_) throw ContractViolation("prefix longer than bit string");
    BitString out(len);
    std::copy_n(bytes_.begin(), out.bytes_.size(), out.bytes_.begin());
    out.clear_padding();
    return out;
  }

  std::string to_string() const {
    std::string s(nbits_, '0');
    for (std::size_t i = 0; i < nbits_; ++i) {
      if (get(i)) s[i] = '1';
    }
    return s;
  }

  BitString& operator^=(const BitString& other) {
    check_same(other);
    for (std::size_t k = 0; k < bytes_.size(); ++k) bytes_[k] ^= other.bytes_[k];
    return *this;
  }
  BitString& operator&=(const BitString& other) {
    check_same(other);
    for (std::size_t k = 0; k < bytes_.size(); ++k) bytes_[k] &= other.bytes_[k];
    return *this;
  }
  BitString& operator|=(const BitString& other) {
    check_same(other);
    for (std::size_t k = 0; k < bytes_.size(); ++k) bytes_[k] |= other.bytes_[k];
    return *this;
  }

  friend BitString operator^(BitString a, const BitString& b) { return a ^= b; }
  friend BitString operator&(BitString a, const BitString& b) { return a &= b; }
  friend BitString operator|(BitString a, const BitString& b) { return a |= b; }
  friend BitString operator~(BitString a) {
    for (auto& b : a.bytes_) b = static_cast<std::uint8_t>(~b);
    a.clear_padding();
    return a;
  }

  friend bool operator==(const BitString&, const BitString&) = default;
  friend auto operator<=>(const BitString&, const BitString&) = default;

 private:
  std::uint8_t tail_mask() const noexcept {
    const std::size_t rem = nbits_ % 8;
    return rem == 0 ? std::uint8_t{0xFF} : static_cast<std::uint8_t>(0xFF << (8 - rem));
  }
  void check_index(std::size_t i) const {
    if (i >= nbits_) throw ContractViolation("bit index out of range");
  }
  void check_same(const BitString& other) const {
    if (other.nbits_ != nbits_) {
      throw ContractViolation("bit string length mismatch: " + std::to_string(nbits_) + " vs " +
                              std::to_string(other.nbits_));
    }
  }

  std::size_t nbits_ = 0;
  std::vector<std::uint8_t> bytes_;
};

enum class Symbol : std::uint8_t { zero, one, star };

// String over {0,1,*}. Stored as the projection (1 where fixed) plus the
// embedded value (fixed bits, 0 under stars).
class TriStateString {
 public:
  TriStateString() = default;

  // All-star string of length n.
  explicit TriStateString(std::size_t n) : care_(n), value_(n) {}

  TriStateString(BitString care, BitString value) : care_(std::move(care)), value_(std::move(value)) {
    if (care_.size() != value_.size()) throw ContractViolation("tri-state halves differ in length");
    if (!(value_ & ~care_).is_zero()) throw ContractViolation("tri-state value set under a star");
  }

  static TriStateString from_text(std::string_view text) {
    TriStateString out(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      switch (text[i]) {
        case '0': out.care_.set(i, true); break;
        case '1':
          out.care_.set(i, true);
          out.value_.set(i, true);
          break;
        case '*': break;
        default:
          throw ContractViolation("tri-state text may only contain 0/1/*: '" + std::string(text) + "'");
      }
    }
    return out;
  }

  static TriStateString exact(const BitString& bits) { return {~BitString(bits.size()), bits}; }
  static TriStateString stars(std::size_t n) { return TriStateString(n); }

  std::size_t size() const noexcept { return care_.size(); }

  Symbol at(std::size_t i) const {
    if (!care_.get(i)) return Symbol::star;
    return value_.get(i) ? Symbol::one : Symbol::zero;
  }

  void set(std::size_t i, Symbol s) {
    care_.set(i, s != Symbol::star);
    value_.set(i, s == Symbol::one);
  }

  // pi_z
  const BitString& care() const noexcept { return care_; }
  // z with stars embedded as 0; equals mask(pi_z, z).
  const BitString& value() const noexcept { return value_; }

  std::size_t fixed_count() const noexcept { return care_.weight(); }
  bool is_all_star() const noexcept { return care_.is_zero(); }

  std::string to_string() const {
    std::string s(size(), '*');
    for (std::size_t i = 0; i < size(); ++i) {
      if (care_.get(i)) s[i] = value_.get(i) ? '1' : '0';
    }
    return s;
  }

  friend bool operator==(const TriStateString&, const TriStateString&) = default;
  friend auto operator<=>(const TriStateString&, const TriStateString&) = default;

 private:
  BitString care_;
  BitString value_;
};

}  // namespace splitbox
