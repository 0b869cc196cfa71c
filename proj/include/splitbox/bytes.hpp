#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "splitbox/error.hpp"

namespace splitbox {

// Big-endian append-only writer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  std::size_t size() const noexcept { return buf_.size(); }
  std::vector<std::uint8_t> take() && { return std::move(buf_); }
  const std::vector<std::uint8_t>& data() const noexcept { return buf_; }

 private:
  void put(std::uint64_t v, int width) {
    for (int k = width - 1; k >= 0; --k) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  std::vector<std::uint8_t> buf_;
};

// Big-endian bounds-checked reader. Every read past the end throws
// DecodeError(truncated).
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }

  std::span<const std::uint8_t> bytes(std::size_t count) {
    need(count);
    auto out = in_.subspan(pos_, count);
    pos_ += count;
    return out;
  }

  std::size_t remaining() const noexcept { return in_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

  void expect_end() const {
    if (remaining() != 0) {
      throw DecodeError(DecodeErrorCode::trailing_bytes, std::to_string(remaining()) + " unread bytes");
    }
  }

 private:
  void need(std::size_t count) const {
    if (count > remaining()) {
      throw DecodeError(DecodeErrorCode::truncated, "need " + std::to_string(count) + " bytes at offset " +
                                                        std::to_string(pos_) + ", have " + std::to_string(remaining()));
    }
  }
  std::uint64_t get(std::size_t width) {
    need(width);
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < width; ++k) v = (v << 8) | in_[pos_ + k];
    pos_ += width;
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace splitbox
