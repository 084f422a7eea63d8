#include "pops/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pops/errors.hpp"

namespace pops {
namespace {

// Independent re-statement of the frozen construction.
std::uint64_t ref_mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t ref_bits(std::uint64_t seed, std::uint64_t packet, std::uint32_t step,
                       std::uint8_t purpose) {
  return ref_mix(ref_mix(ref_mix(seed) ^ packet) ^ ((std::uint64_t{step} << 8) | purpose));
}

// (bits * m) >> 64 without 128-bit arithmetic.
std::uint64_t ref_reduce(std::uint64_t bits, std::uint64_t m) {
  const std::uint64_t lo = bits & 0xFFFFFFFFu, hi = bits >> 32;
  const std::uint64_t mlo = m & 0xFFFFFFFFu, mhi = m >> 32;
  const std::uint64_t ll = lo * mlo, lh = lo * mhi, hl = hi * mlo, hh = hi * mhi;
  const std::uint64_t mid = (ll >> 32) + (lh & 0xFFFFFFFFu) + (hl & 0xFFFFFFFFu);
  return hh + (lh >> 32) + (hl >> 32) + (mid >> 32);
}

TEST(Rng, MatchesReferenceConstruction) {
  for (std::uint64_t seed : {0ull, 1ull, 0xDEADBEEFull}) {
    for (std::uint64_t pkt = 0; pkt < 50; ++pkt) {
      for (std::uint32_t step = 1; step < 4; ++step) {
        const RandomKey key{seed, pkt, step, Purpose::Color};
        EXPECT_EQ(derive_bits(key), ref_bits(seed, pkt, step, 0));
        EXPECT_EQ(derive_uniform_group(key, 4), ref_reduce(ref_bits(seed, pkt, step, 0), 4));
        EXPECT_EQ(derive_uniform(key, 1000003), ref_reduce(ref_bits(seed, pkt, step, 0), 1000003));
      }
    }
  }
}

TEST(Rng, FixedKeyIsStable) {
  const RandomKey k0{42, 7, 3, Purpose::Color};
  const auto first = derive_uniform_group(k0, 4);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(derive_uniform_group(k0, 4), first);
  static_assert(mix64(0) == 0xE220A8397B1DCDAFULL);
}

TEST(Rng, SingletonSupport) {
  for (std::uint64_t p = 0; p < 1000; ++p) {
    EXPECT_EQ(derive_uniform_group({9, p, 1, Purpose::Color}, 1), 0u);
  }
}

TEST(Rng, DomainErrors) {
  EXPECT_THROW(derive_uniform_group({}, 0), DomainError);
  EXPECT_THROW(derive_uniform({}, 0), DomainError);
  EXPECT_THROW(derive_bernoulli({}, -0.1), DomainError);
  EXPECT_THROW(derive_bernoulli({}, 1.5), DomainError);
  EXPECT_THROW(derive_bernoulli({}, std::nan("")), DomainError);
}

TEST(Rng, GroupDrawsAreUniform) {
  constexpr int kDraws = 1'000'000;
  constexpr int kG = 16;
  std::vector<int> freq(kG, 0);
  for (int i = 0; i < kDraws; ++i) {
    ++freq[derive_uniform_group({12345, static_cast<std::uint64_t>(i), 1, Purpose::Color}, kG)];
  }
  const double expect = static_cast<double>(kDraws) / kG;
  const double sigma = std::sqrt(kDraws * (1.0 / kG) * (1.0 - 1.0 / kG));
  double chi2 = 0;
  for (int r = 0; r < kG; ++r) {
    EXPECT_LT(std::abs(freq[r] - expect), 5 * sigma) << "residue " << r;
    chi2 += (freq[r] - expect) * (freq[r] - expect) / expect;
  }
  // 15 degrees of freedom; 0.9999 quantile is about 44.3.
  EXPECT_LT(chi2, 44.3);
}

TEST(Rng, BernoulliFrequency) {
  constexpr int kDraws = 1'000'000;
  int yes = 0;
  for (int i = 0; i < kDraws; ++i) {
    yes += derive_bernoulli({777, static_cast<std::uint64_t>(i), 2, Purpose::Coin}, 0.25);
  }
  EXPECT_NEAR(static_cast<double>(yes) / kDraws, 0.25, 0.005);
}

TEST(Rng, BernoulliEdges) {
  for (std::uint64_t i = 0; i < 10000; ++i) {
    EXPECT_TRUE(derive_bernoulli({1, i, 1, Purpose::Coin}, 1.0));
    EXPECT_FALSE(derive_bernoulli({1, i, 1, Purpose::Coin}, 0.0));
  }
}

TEST(Rng, PurposeSeparatesStreams) {
  int same = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto a = derive_bits({5, i, 1, Purpose::Color});
    const auto b = derive_bits({5, i, 1, Purpose::Coin});
    EXPECT_NE(a, b);
    same += derive_uniform_group({5, i, 1, Purpose::Color}, 2) ==
            derive_uniform_group({5, i, 1, Purpose::Coin}, 2);
  }
  // Agreement of two independent fair bits: Binomial(1000, 1/2).
  EXPECT_NEAR(same, 500, 5 * std::sqrt(250.0));
}

TEST(Rng, RunSeedsDiffer) {
  EXPECT_NE(derive_run_seed(1, 0), derive_run_seed(1, 1));
  EXPECT_EQ(derive_run_seed(1, 1), derive_run_seed(2, 0));
  EXPECT_EQ(derive_run_seed(3, 4), derive_bits({7, 0, 1, Purpose::Run}));
}

}  // namespace
}  // namespace pops
