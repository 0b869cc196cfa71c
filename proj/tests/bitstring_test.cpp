#include <gtest/gtest.h>

#include "splitbox/bitstring.hpp"
#include "splitbox/random.hpp"

using namespace splitbox;

TEST(BitString, TextRoundTripAndBitOrder) {
  auto b = BitString::from_text("10110");
  EXPECT_EQ(b.size(), 5u);
  EXPECT_EQ(b.to_string(), "10110");
  ASSERT_EQ(b.bytes().size(), 1u);
  EXPECT_EQ(b.bytes()[0], 0b10110000);  // MSB-first, zero padding
}

TEST(BitString, FromBytesRejectsPaddingAndSize) {
  const std::uint8_t ok[] = {0xA0};
  EXPECT_EQ(BitString::from_bytes(ok, 3).to_string(), "101");
  const std::uint8_t bad[] = {0xA1};
  EXPECT_THROW(BitString::from_bytes(bad, 3), ContractViolation);
  EXPECT_THROW(BitString::from_bytes(ok, 9), ContractViolation);
}

TEST(BitString, OperatorsKeepPaddingClear) {
  auto a = BitString::from_text("101");
  auto inv = ~a;
  EXPECT_EQ(inv.to_string(), "010");
  EXPECT_EQ(inv.bytes()[0], 0b01000000);
  EXPECT_EQ((a ^ inv).weight(), 3u);
  EXPECT_EQ((a & inv).weight(), 0u);
  EXPECT_THROW(a ^ BitString(4), ContractViolation);
}

TEST(BitString, WeightPrefixAndZero) {
  auto a = BitString::from_text("1100101");
  EXPECT_EQ(a.weight(), 4u);
  EXPECT_EQ(a.prefix(3).to_string(), "110");
  EXPECT_TRUE(BitString(17).is_zero());
  EXPECT_FALSE(a.is_zero());
}

TEST(TriState, ProjectionAndEmbedding) {
  auto z = TriStateString::from_text("10**");
  EXPECT_EQ(z.care().to_string(), "1100");
  EXPECT_EQ(z.value().to_string(), "1000");
  EXPECT_EQ(TriStateString::from_text("****").care().to_string(), "0000");
  EXPECT_EQ(TriStateString::from_text("0101").care().to_string(), "1111");
  EXPECT_EQ(z.to_string(), "10**");
  EXPECT_EQ(z.fixed_count(), 2u);
  EXPECT_THROW(TriStateString::from_text("10x*"), ContractViolation);
}

TEST(TriState, ValueUnderStarRejected) {
  EXPECT_THROW(TriStateString(BitString::from_text("10"), BitString::from_text("01")), ContractViolation);
}

TEST(TriState, RandomTextRoundTrip) {
  auto rng = RandomSource::seeded(5);
  const char sym[] = {'0', '1', '*'};
  for (int trial = 0; trial < 1000; ++trial) {
    std::string s(rng.uniform(1, 40), '0');
    for (auto& c : s) c = sym[rng.uniform(0, 2)];
    EXPECT_EQ(TriStateString::from_text(s).to_string(), s);
  }
}

TEST(Random, SeededIsReproducible) {
  auto a = RandomSource::seeded(42), b = RandomSource::seeded(42), c = RandomSource::seeded(43);
  EXPECT_EQ(a.bits(128), b.bits(128));
  EXPECT_NE(a.bits(128), c.bits(128));
  EXPECT_EQ(a.seed(), std::optional<std::uint64_t>(42));
  EXPECT_FALSE(RandomSource::os().seed().has_value());
}

TEST(Random, BitsAreBalanced) {
  auto rng = RandomSource::seeded(9);
  std::size_t ones = 0;
  for (int k = 0; k < 1000; ++k) ones += rng.bits(100).weight();
  EXPECT_NEAR(static_cast<double>(ones) / 1e5, 0.5, 0.01);
}

TEST(Random, UniformStaysInRange) {
  auto rng = RandomSource::seeded(3);
  for (int k = 0; k < 10000; ++k) {
    auto v = rng.uniform(5, 9);
    EXPECT_GE(v, 5u);
    EXPECT_LE(v, 9u);
  }
}
