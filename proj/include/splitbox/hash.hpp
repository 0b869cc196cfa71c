#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "splitbox/bitstring.hpp"
#include "splitbox/error.hpp"

namespace splitbox {

inline constexpr std::uint32_t kSha1DigestBits = 160;
inline constexpr std::uint32_t kSha256DigestBits = 256;
inline constexpr std::size_t kMaxDigestBytes = 32;

using Digest = std::array<std::uint8_t, kMaxDigestBytes>;

// The match hash H: {0,1}^n -> {0,1}^q. The digest width selects the
// algorithm: 160 is SHA-1, 256 is SHA-256. The input is the bit string's
// byte form (MSB-first, zero padding).
class MatchHasher {
 public:
  explicit MatchHasher(std::uint32_t digest_bits) : bits_(digest_bits) {
    if (digest_bits == kSha1DigestBits) {
      md_ = EVP_sha1();
    } else if (digest_bits == kSha256DigestBits) {
      md_ = EVP_sha256();
    } else {
      throw ConfigError("unsupported digest width q=" + std::to_string(digest_bits) + " (use 160 or 256)");
    }
  }

  std::uint32_t digest_bits() const noexcept { return bits_; }
  std::size_t digest_bytes() const noexcept { return bits_ / 8; }

  void hash(std::span<const std::uint8_t> input, std::span<std::uint8_t> out) const {
    if (out.size() != digest_bytes()) throw ContractViolation("digest buffer size mismatch");
    EVP_MD_CTX* ctx = context();
    std::array<std::uint8_t, EVP_MAX_MD_SIZE> scratch{};
    unsigned int len = 0;
    if (EVP_DigestInit_ex(ctx, md_, nullptr) != 1 || EVP_DigestUpdate(ctx, input.data(), input.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, scratch.data(), &len) != 1 || len != out.size()) {
      throw Error("digest computation failed");
    }
    std::copy_n(scratch.begin(), len, out.begin());
  }

  void hash(const BitString& bits, std::span<std::uint8_t> out) const { hash(bits.bytes(), out); }

  std::vector<std::uint8_t> hash(const BitString& bits) const {
    std::vector<std::uint8_t> out(digest_bytes());
    hash(bits.bytes(), out);
    return out;
  }

 private:
  struct CtxDeleter {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
  };

  static EVP_MD_CTX* context() {
    thread_local std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx(EVP_MD_CTX_new());
    if (!ctx) throw Error("cannot allocate digest context");
    return ctx.get();
  }

  std::uint32_t bits_;
  const EVP_MD* md_ = nullptr;
};

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s += digits[b >> 4];
    s += digits[b & 0xF];
  }
  return s;
}

}  // namespace splitbox
