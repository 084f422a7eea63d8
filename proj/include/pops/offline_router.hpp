#pragma once

// Deterministic offline permutation routing in 1 slot (d = 1) or 2*ceil(d/g)
// slots (d > 1), built from a proper edge colouring of the group multigraph.
//
// Each packet is an edge (group(i), group(pi(i))). A colour class is a
// matching, so routing one class through a single intermediate group per
// colour uses every coupler at most once. For d >= g, colours are processed
// in batches of g: colour k*g + j goes through intermediate group j and is
// relayed by processor j*d + (source group). For 1 < d < g the colouring is
// rebalanced to g classes of exactly d edges, class j goes through group j
// and its edges are relayed by processors j*d + 0 .. j*d + d-1 in packet
// order.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pops/analysis.hpp"
#include "pops/network.hpp"

namespace pops {

struct GroupMultigraph {
  struct Edge {
    PacketId packet;
    GroupId left;   // source group
    GroupId right;  // destination group
  };

  std::uint32_t groups = 0;
  std::vector<Edge> edges;

  static GroupMultigraph from_permutation(std::span<const ProcessorId> perm,
                                          const NetworkConfig& cfg);
  std::uint32_t max_degree() const;
};

struct EdgeColoring {
  std::uint32_t colors = 0;
  std::vector<std::uint32_t> color;  // one entry per edge
};

// Alternating-path (Koenig) colouring with exactly max_degree colours.
// Deterministic for a fixed edge order.
EdgeColoring edge_color_bipartite(const GroupMultigraph& graph);

// Redistributes a proper colouring over `colors` >= its colour count so that
// class sizes differ by at most one, keeping it proper.
EdgeColoring balance_coloring(const GroupMultigraph& graph, EdgeColoring coloring,
                              std::uint32_t colors);

bool is_proper_coloring(const GroupMultigraph& graph, const EdgeColoring& coloring);

struct Itinerary {
  PacketId packet = 0;
  ProcessorId source = 0;
  ProcessorId dest = 0;
  std::uint32_t batch = 0;
  GroupId intermediate = 0;
  ProcessorId relay = 0;  // unused for direct (d = 1) routing
};

struct OfflineSchedule {
  NetworkConfig cfg{1, 1};
  bool direct = false;  // d = 1: a single slot over c(group(pi(i)), group(i))
  std::uint32_t batches = 0;
  std::vector<Itinerary> itineraries;  // indexed by packet id

  std::uint32_t slot_count() const noexcept { return direct ? 1 : 2 * batches; }
};

// Throws ValidationError for a non-bijective perm.
OfflineSchedule plan_offline(std::span<const ProcessorId> perm, const NetworkConfig& cfg);

struct OfflineResult {
  OfflineSchedule schedule;
  RunStats stats;
  std::vector<PacketId> placement;  // packet held by each processor at the end
};

// Plans and executes through the slot engine. Throws InvariantViolation if
// any slot conflicts or a packet ends anywhere but pi(i).
OfflineResult route_offline(std::span<const ProcessorId> perm, const NetworkConfig& cfg);
OfflineResult route_offline(std::span<const ProcessorId> perm, SlotEngine& engine);

std::string schedule_to_json(const OfflineSchedule& schedule);

}  // namespace pops
