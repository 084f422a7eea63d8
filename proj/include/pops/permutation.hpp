#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "pops/network.hpp"

namespace pops {

using Permutation = std::vector<ProcessorId>;

// Throws ValidationError unless perm is a bijection on [0, n).
void validate_permutation(std::span<const ProcessorId> perm, std::uint32_t n);
bool is_permutation(std::span<const ProcessorId> perm, std::uint32_t n) noexcept;

enum class PermSource : std::uint8_t { Uniform, Identity, Reversal, Stress, File };

PermSource parse_perm_source(std::string_view name);
std::string_view to_string(PermSource source) noexcept;

// Uniform, Identity and Reversal only need n; Stress needs the network shape
// (and d > g). File sources go through load_permutation.
Permutation generate_permutation(PermSource source, const NetworkConfig& cfg,
                                 std::uint64_t seed);

// Uniform over all n! permutations: Fisher-Yates driven by keyed draws.
Permutation uniform_permutation(std::uint32_t n, std::uint64_t seed);
Permutation identity_permutation(std::uint32_t n);
Permutation reversal_permutation(std::uint32_t n);

// Destinations sharing both final group and temporary destination group
// (j, j+g, j+2g, ... inside one group) are handed to sources in consecutive
// positions of a group-interleaved source order, so every such pair starts in
// different source groups and can clear the first two slots together.
// Throws DomainError unless d > g.
Permutation stress_permutation(const NetworkConfig& cfg);

// Whitespace-separated destination list. Throws IoError if unreadable,
// ValidationError if not a bijection on [0, n).
Permutation load_permutation(const std::filesystem::path& path, std::uint32_t n);

Permutation inverse(std::span<const ProcessorId> perm);

}  // namespace pops
