#pragma once

// Conflict-graph metrics, the participation degree schedule, the
// comparator-based baseline slot formula and cross-run statistics.

#include <cstdint>
#include <span>
#include <vector>

#include "pops/network.hpp"

namespace pops {

struct PendingPacket {
  PacketId id = 0;
  ProcessorId location = 0;  // processor currently holding the original
  ProcessorId dest = 0;
};

// Bipartite multigraph: one edge per pending packet, from the group holding
// it to the temporary destination group of its destination.
struct ConflictGraph {
  struct Edge {
    PacketId packet;
    GroupId source_group;
    GroupId temp_group;
  };

  std::vector<std::uint32_t> left_degree;   // |S_a|
  std::vector<std::uint32_t> right_degree;  // |D_b|
  std::vector<Edge> edges;

  std::uint32_t max_left_degree() const noexcept;
  std::uint32_t max_right_degree() const noexcept;
  std::uint32_t max_degree() const noexcept;
};

ConflictGraph build_conflict_graph(std::span<const PendingPacket> pending,
                                   const NetworkConfig& cfg);

// Per-step observations of a randomized routing run.
struct StepMetrics {
  std::uint32_t step = 0;
  double participation = 1.0;  // coin bias (mean over groups in adaptive mode)
  std::uint32_t pending = 0;   // packets not yet delivered when the step began
  std::uint32_t participants = 0;
  std::uint32_t slot1_survivors = 0;
  std::uint32_t slot2_survivors = 0;
  std::uint32_t deliveries = 0;
  std::uint32_t max_left_degree = 0;
  std::uint32_t max_right_degree = 0;
  double lambda = 0.0;  // observed max degree / g
  std::vector<std::uint32_t> conflicts;  // conflicted couplers, one entry per slot
  std::uint32_t losses = 0;              // acked at source, then lost in delivery
  std::uint32_t unacked_deliveries = 0;  // delivered without the source deleting
  std::uint32_t duplicates = 0;          // copies arriving at an already-served destination
  std::uint32_t max_buffer_occupancy = 0;
};

struct RunStats {
  std::uint64_t seed = 0;
  std::uint32_t iterations = 0;
  std::uint32_t slots_per_step = 0;
  std::uint64_t slots = 0;
  std::vector<StepMetrics> per_step;

  std::uint64_t conflicts_slot1 = 0;
  std::uint64_t conflicts_slot2 = 0;
  std::uint64_t conflicts_ack = 0;
  std::uint64_t conflicts_delivery = 0;
  std::uint64_t losses = 0;
  std::uint64_t duplicates = 0;
  std::uint32_t max_buffer_occupancy = 0;
};

// d - g(s-1)/c_eps: the degree the participation schedule aims for at step s.
double schedule_degree_bound(std::uint32_t s, const NetworkConfig& cfg, double c_eps);

// First phase-1 step s whose following conflict graph has a degree above
// schedule_degree_bound(s + 1), or 0 if the run stayed on schedule. Phase 1
// lasts ceil(c_eps (d/g - 1)) steps.
std::uint32_t first_schedule_overrun(const RunStats& run, const NetworkConfig& cfg,
                                     double c_eps);

// Slot count of the comparator-based deterministic router used as the
// baseline, with the odd-even merge stage count log n (log n + 1) / 2:
//   (4 log^2 g + 2 log g + 21) d/g + 3 log g + 7,
// rounded up when d/g is fractional. Throws DomainError unless g is a power
// of two.
std::uint64_t baseline_ds_slots(const NetworkConfig& cfg);

struct Summary {
  double mean = 0.0;
  double sigma = 0.0;  // population standard deviation
  double max = 0.0;
};

// Throws DomainError on empty input.
Summary summarize(std::span<const double> values);

struct RunAggregate {
  std::size_t runs = 0;
  Summary iterations;
  Summary slots;
  Summary conflicts_slot1;
  Summary conflicts_slot2;
  Summary conflicts_ack;
  Summary conflicts_delivery;
};

RunAggregate aggregate_stats(std::span<const RunStats> runs);

}  // namespace pops
