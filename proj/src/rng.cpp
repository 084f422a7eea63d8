#include "pops/rng.hpp"

#include <cmath>

#include "pops/errors.hpp"

namespace pops {

namespace {
__extension__ typedef unsigned __int128 u128;
}  // namespace

std::uint64_t derive_uniform(const RandomKey& key, std::uint64_t bound) {
  if (bound == 0) throw DomainError("uniform draw over an empty range");
  const u128 wide = static_cast<u128>(derive_bits(key)) * bound;
  return static_cast<std::uint64_t>(wide >> 64);
}

std::uint32_t derive_uniform_group(const RandomKey& key, std::uint32_t g) {
  if (g == 0) throw DomainError("group count must be positive");
  return static_cast<std::uint32_t>(derive_uniform(key, g));
}

bool derive_bernoulli(const RandomKey& key, double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("probability outside [0, 1]");
  }
  // p * 2^53 is exact for doubles in [0,1]; the floor makes the threshold an
  // integer in [0, 2^53].
  const auto threshold = static_cast<std::uint64_t>(std::ldexp(p, 53));
  return (derive_bits(key) >> 11) < threshold;
}

std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t index) noexcept {
  return derive_bits(RandomKey{base_seed + index, 0, 1, Purpose::Run});
}

}  // namespace pops
