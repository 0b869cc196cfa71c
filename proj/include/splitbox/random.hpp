#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>

#include <openssl/rand.h>

#include "splitbox/bitstring.hpp"
#include "splitbox/error.hpp"

namespace splitbox {

// All protocol sampling goes through this. Seeded sources are reproducible
// (mt19937_64); the OS source draws from OpenSSL's CSPRNG.
class RandomSource {
 public:
  static RandomSource seeded(std::uint64_t seed) { return RandomSource(seed); }
  static RandomSource os() { return RandomSource(); }

  std::optional<std::uint64_t> seed() const noexcept { return seed_; }
  bool is_seeded() const noexcept { return seed_.has_value(); }

  std::uint64_t next_u64() {
    if (seed_) return engine_();
    std::uint64_t v = 0;
    os_fill(std::span(reinterpret_cast<std::uint8_t*>(&v), sizeof v));
    return v;
  }

  void fill(std::span<std::uint8_t> out) {
    if (!seed_) {
      os_fill(out);
      return;
    }
    std::size_t k = 0;
    while (k < out.size()) {
      std::uint64_t v = engine_();
      for (int b = 0; b < 8 && k < out.size(); ++b, ++k) {
        out[k] = static_cast<std::uint8_t>(v >> (56 - 8 * b));
      }
    }
  }

  BitString bits(std::size_t n) {
    BitString out(n);
    fill(out.mutable_bytes());
    out.clear_padding();
    return out;
  }

  bool bit() { return (next_u64() >> 63) != 0; }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  // Uniform integer in [lo, hi].
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
    if (hi < lo) throw ContractViolation("uniform: empty range");
    const std::uint64_t span = hi - lo;
    if (span == UINT64_MAX) return next_u64();
    const std::uint64_t range = span + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t v = 0;
    do {
      v = next_u64();
    } while (v >= limit);
    return lo + v % range;
  }

  double exponential(double mean) { return -mean * std::log1p(-uniform01()); }

  RandomSource fork() {
    if (seed_) return seeded(next_u64());
    return os();
  }

 private:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}
  RandomSource() = default;

  static void os_fill(std::span<std::uint8_t> out) {
    if (out.empty()) return;
    if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
      throw Error("OS randomness source failed");
    }
  }

  std::optional<std::uint64_t> seed_;
  std::mt19937_64 engine_;
};

}  // namespace splitbox
