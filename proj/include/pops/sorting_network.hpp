#pragma once

// Comparator networks executed on POPS. A comparator stage is realised by
// routing the involution that swaps the two ends of every comparator (and
// fixes everything else) with the offline router, after which the lower
// position keeps the smaller key. Sorting uses Batcher's odd-even merge
// sort; routing by sorting uses destination indices as keys.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pops/analysis.hpp"
#include "pops/network.hpp"

namespace pops {

// [i:j]: after the comparator, position min(i,j) holds the smaller key.
struct Comparator {
  std::uint32_t i = 0;
  std::uint32_t j = 0;

  bool operator==(const Comparator&) const = default;
};

using ComparatorStage = std::vector<Comparator>;

struct ComparatorNetwork {
  std::uint32_t width = 0;
  std::vector<ComparatorStage> stages;

  std::size_t comparator_count() const noexcept;
};

// Throws ContractError if two comparators share an endpoint, if i == j, or if
// an endpoint is outside [0, width).
void validate_stage(const ComparatorStage& stage, std::uint32_t width);

// Odd-even merge sort on n = 2^k inputs, k >= 1: k(k+1)/2 stages.
// Throws DomainError otherwise.
ComparatorNetwork batcher_network(std::uint32_t n);

std::string network_to_json(const ComparatorNetwork& network);

struct KeyedRecord {
  std::int64_t key = 0;
  std::uint64_t payload = 0;

  bool operator==(const KeyedRecord&) const = default;
};

// Runs one stage over records[0..n) through the engine. Returns slots used:
// 0 for an empty stage, otherwise 1 (d = 1) or 2*ceil(d/g).
std::uint64_t simulate_stage(const ComparatorStage& stage, std::span<KeyedRecord> records,
                             SlotEngine& engine);
std::uint64_t simulate_stage(const ComparatorStage& stage, std::span<KeyedRecord> records,
                             const NetworkConfig& cfg);

struct SortResult {
  std::vector<KeyedRecord> records;
  std::uint64_t slots = 0;
};

// Sorts g^2 records on POPS(g,g), g a power of two >= 2, in
// 4 log^2 g + 2 log g slots. Throws ValidationError for other shapes or a
// record count other than n.
SortResult sort_on_pops(std::vector<KeyedRecord> records, const NetworkConfig& cfg);

// Expected slot count of sort_on_pops for POPS(g,g).
std::uint64_t sort_slot_count(const NetworkConfig& cfg);

struct SortRouteResult {
  RunStats stats;
  std::vector<PacketId> placement;  // packet held by each processor at the end
};

// Deterministic online routing: sort records keyed by destination. Throws
// ValidationError for non-bijective perm or d != g, InvariantViolation if a
// packet ends anywhere but pi(i).
SortRouteResult route_by_sorting(std::span<const ProcessorId> perm, const NetworkConfig& cfg);

}  // namespace pops
