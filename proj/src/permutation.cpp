#include "pops/permutation.hpp"

#include <fstream>
#include <numeric>
#include <string>
#include <utility>

#include "pops/errors.hpp"
#include "pops/rng.hpp"

namespace pops {

bool is_permutation(std::span<const ProcessorId> perm, std::uint32_t n) noexcept {
  if (perm.size() != n) return false;
  std::vector<std::uint8_t> seen(n, 0);
  for (ProcessorId x : perm) {
    if (x >= n || seen[x]) return false;
    seen[x] = 1;
  }
  return true;
}

void validate_permutation(std::span<const ProcessorId> perm, std::uint32_t n) {
  if (perm.size() != n) {
    throw ValidationError("permutation has " + std::to_string(perm.size()) +
                          " entries, expected " + std::to_string(n));
  }
  std::vector<std::uint8_t> seen(n, 0);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const ProcessorId x = perm[i];
    if (x >= n) {
      throw ValidationError("destination " + std::to_string(x) + " at position " +
                            std::to_string(i) + " is out of range");
    }
    if (seen[x]) {
      throw ValidationError("destination " + std::to_string(x) + " appears twice");
    }
    seen[x] = 1;
  }
}

PermSource parse_perm_source(std::string_view name) {
  if (name == "uniform") return PermSource::Uniform;
  if (name == "identity") return PermSource::Identity;
  if (name == "reversal") return PermSource::Reversal;
  if (name == "stress") return PermSource::Stress;
  if (name == "file") return PermSource::File;
  throw ValidationError("unknown permutation source '" + std::string(name) + "'");
}

std::string_view to_string(PermSource source) noexcept {
  switch (source) {
    case PermSource::Uniform: return "uniform";
    case PermSource::Identity: return "identity";
    case PermSource::Reversal: return "reversal";
    case PermSource::Stress: return "stress";
    case PermSource::File: return "file";
  }
  return "?";
}

Permutation uniform_permutation(std::uint32_t n, std::uint64_t seed) {
  Permutation perm = identity_permutation(n);
  for (std::uint32_t i = n; i > 1; --i) {
    const auto j = static_cast<std::uint32_t>(
        derive_uniform(RandomKey{seed, i - 1, 1, Purpose::Permutation}, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

Permutation identity_permutation(std::uint32_t n) {
  if (n == 0) throw DomainError("permutation size must be positive");
  Permutation perm(n);
  std::iota(perm.begin(), perm.end(), ProcessorId{0});
  return perm;
}

Permutation reversal_permutation(std::uint32_t n) {
  Permutation perm = identity_permutation(n);
  for (std::uint32_t i = 0; i < n; ++i) perm[i] = n - 1 - i;
  return perm;
}

Permutation stress_permutation(const NetworkConfig& cfg) {
  const std::uint32_t d = cfg.d();
  const std::uint32_t g = cfg.g();
  if (d <= g) throw DomainError("stress permutation needs d > g");

  std::vector<ProcessorId> dests;
  dests.reserve(cfg.n());
  for (GroupId group = 0; group < g; ++group) {
    for (std::uint32_t residue = 0; residue < g; ++residue) {
      // Processors of `group` congruent to `residue` mod g.
      const ProcessorId base = group * d;
      ProcessorId first = base + (residue + g - base % g) % g;
      for (ProcessorId j = first; j < base + d; j += g) dests.push_back(j);
    }
  }

  Permutation perm(cfg.n());
  std::size_t k = 0;
  for (std::uint32_t index = 0; index < d; ++index) {
    for (GroupId group = 0; group < g; ++group) {
      perm[group * d + index] = dests[k++];
    }
  }
  return perm;
}

Permutation generate_permutation(PermSource source, const NetworkConfig& cfg,
                                 std::uint64_t seed) {
  switch (source) {
    case PermSource::Uniform: return uniform_permutation(cfg.n(), seed);
    case PermSource::Identity: return identity_permutation(cfg.n());
    case PermSource::Reversal: return reversal_permutation(cfg.n());
    case PermSource::Stress: return stress_permutation(cfg);
    case PermSource::File:
      throw ValidationError("file permutations are read with load_permutation");
  }
  throw ValidationError("unknown permutation source");
}

Permutation load_permutation(const std::filesystem::path& path, std::uint32_t n) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read permutation file " + path.string());
  Permutation perm;
  long long value = 0;
  while (in >> value) {
    if (value < 0 || value > 0xFFFFFFFFLL) {
      throw ValidationError("permutation entry " + std::to_string(value) + " out of range");
    }
    perm.push_back(static_cast<ProcessorId>(value));
  }
  if (!in.eof()) throw ValidationError("permutation file contains non-numeric data");
  validate_permutation(perm, n);
  return perm;
}

Permutation inverse(std::span<const ProcessorId> perm) {
  Permutation inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<ProcessorId>(i);
  return inv;
}

}  // namespace pops
