#pragma once

// Counter-based keyed randomness. Every draw is a pure function of
// (seed, packet id, step, purpose); there is no stream state to share, so a
// run is bit-reproducible regardless of evaluation order or threading.
//
// Construction (frozen; changing it changes every recorded experiment):
//
//   mix(x)  = splitmix64 finalizer of (x + 0x9E3779B97F4A7C15):
//             z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//             z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//             z ^ (z >> 31)
//   bits(k) = mix(mix(mix(seed) ^ packet) ^ ((step << 8) | purpose))
//
// Uniform draws over [0, m) use the 128-bit multiply-shift reduction
// (bits * m) >> 64; the bias is at most m / 2^64. Bernoulli draws compare the
// top 53 bits against floor(p * 2^53).

#include <cstdint>

namespace pops {

enum class Purpose : std::uint8_t {
  Color = 0,        // random intermediate group
  Coin = 1,         // participation coin
  Permutation = 2,  // Fisher-Yates swaps
  Run = 3,          // per-run seed derivation
  Keys = 4,         // random sort keys
  Backoff = 5,      // retry coin after a failed delivery
};

struct RandomKey {
  std::uint64_t seed = 0;
  std::uint64_t packet = 0;
  std::uint32_t step = 1;
  Purpose purpose = Purpose::Color;
};

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_bits(const RandomKey& key) noexcept {
  const std::uint64_t tag =
      (std::uint64_t{key.step} << 8) | static_cast<std::uint64_t>(key.purpose);
  return mix64(mix64(mix64(key.seed) ^ key.packet) ^ tag);
}

// Uniform in [0, bound). Throws DomainError for bound == 0.
std::uint64_t derive_uniform(const RandomKey& key, std::uint64_t bound);

// Uniform group in [0, g). Throws DomainError for g == 0.
std::uint32_t derive_uniform_group(const RandomKey& key, std::uint32_t g);

// True with probability p. Throws DomainError unless 0 <= p <= 1.
bool derive_bernoulli(const RandomKey& key, double p);

// Seed of run `index` in a block of runs sharing `base_seed`.
std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t index) noexcept;

}  // namespace pops
