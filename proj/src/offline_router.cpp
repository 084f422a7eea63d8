#include "pops/offline_router.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <utility>

#include <json.hpp>

#include "pops/errors.hpp"
#include "pops/permutation.hpp"

namespace pops {

namespace {

constexpr std::uint32_t kFree = std::numeric_limits<std::uint32_t>::max();

// Per-vertex colour slots: which edge (if any) uses colour c at a vertex.
class ColorTable {
 public:
  ColorTable(std::uint32_t vertices, std::uint32_t colors)
      : colors_(colors),
        left_(std::size_t{vertices} * colors, kFree),
        right_(std::size_t{vertices} * colors, kFree) {}

  std::uint32_t& left(GroupId v, std::uint32_t c) { return left_[std::size_t{v} * colors_ + c]; }
  std::uint32_t& right(GroupId v, std::uint32_t c) {
    return right_[std::size_t{v} * colors_ + c];
  }

  std::uint32_t first_free_left(GroupId v) {
    for (std::uint32_t c = 0; c < colors_; ++c) {
      if (left(v, c) == kFree) return c;
    }
    return kFree;
  }
  std::uint32_t first_free_right(GroupId v) {
    for (std::uint32_t c = 0; c < colors_; ++c) {
      if (right(v, c) == kFree) return c;
    }
    return kFree;
  }

 private:
  std::uint32_t colors_;
  std::vector<std::uint32_t> left_;
  std::vector<std::uint32_t> right_;
};

// Walks the maximal path alternating colours `first`, `second`, ... that
// starts at `start` (on the side given by `from_left`).
std::vector<std::uint32_t> alternating_path(const GroupMultigraph& graph, ColorTable& table,
                                            GroupId start, bool from_left,
                                            std::uint32_t first, std::uint32_t second) {
  std::vector<std::uint32_t> path;
  GroupId v = start;
  bool on_left = from_left;
  std::uint32_t c = first;
  while (true) {
    const std::uint32_t e = on_left ? table.left(v, c) : table.right(v, c);
    if (e == kFree) break;
    path.push_back(e);
    const auto& edge = graph.edges[e];
    v = on_left ? edge.right : edge.left;
    on_left = !on_left;
    c = (c == first) ? second : first;
  }
  return path;
}

void swap_path_colors(const GroupMultigraph& graph, ColorTable& table,
                      std::vector<std::uint32_t>& color, std::span<const std::uint32_t> path,
                      std::uint32_t a, std::uint32_t b) {
  for (std::uint32_t e : path) {
    const auto& edge = graph.edges[e];
    table.left(edge.left, color[e]) = kFree;
    table.right(edge.right, color[e]) = kFree;
  }
  for (std::uint32_t e : path) {
    const auto& edge = graph.edges[e];
    color[e] = (color[e] == a) ? b : a;
    table.left(edge.left, color[e]) = e;
    table.right(edge.right, color[e]) = e;
  }
}

}  // namespace

GroupMultigraph GroupMultigraph::from_permutation(std::span<const ProcessorId> perm,
                                                  const NetworkConfig& cfg) {
  validate_permutation(perm, cfg.n());
  GroupMultigraph graph;
  graph.groups = cfg.g();
  graph.edges.reserve(perm.size());
  for (PacketId i = 0; i < perm.size(); ++i) {
    graph.edges.push_back({i, cfg.group_of(i), cfg.group_of(perm[i])});
  }
  return graph;
}

std::uint32_t GroupMultigraph::max_degree() const {
  std::vector<std::uint32_t> left(groups, 0), right(groups, 0);
  std::uint32_t best = 0;
  for (const auto& e : edges) {
    if (e.left >= groups || e.right >= groups) {
      throw DomainError("multigraph edge endpoint out of range");
    }
    best = std::max({best, ++left[e.left], ++right[e.right]});
  }
  return best;
}

EdgeColoring edge_color_bipartite(const GroupMultigraph& graph) {
  EdgeColoring out;
  out.colors = graph.max_degree();
  out.color.assign(graph.edges.size(), kFree);
  if (graph.edges.empty()) return out;

  ColorTable table(graph.groups, out.colors);
  for (std::uint32_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    const std::uint32_t alpha = table.first_free_left(edge.left);
    const std::uint32_t beta = table.first_free_right(edge.right);
    if (table.right(edge.right, alpha) != kFree) {
      // alpha is taken at the right end: flip the alpha/beta path from there.
      // Bipartiteness keeps the path away from edge.left, where alpha is free.
      const auto path = alternating_path(graph, table, edge.right, false, alpha, beta);
      swap_path_colors(graph, table, out.color, path, alpha, beta);
    }
    out.color[e] = alpha;
    table.left(edge.left, alpha) = e;
    table.right(edge.right, alpha) = e;
  }
  return out;
}

EdgeColoring balance_coloring(const GroupMultigraph& graph, EdgeColoring coloring,
                              std::uint32_t colors) {
  if (colors < coloring.colors) {
    throw DomainError("cannot rebalance onto fewer colours than the colouring uses");
  }
  coloring.colors = colors;
  if (graph.edges.empty()) return coloring;

  ColorTable table(graph.groups, colors);
  std::vector<std::uint32_t> size(colors, 0);
  for (std::uint32_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    table.left(edge.left, coloring.color[e]) = e;
    table.right(edge.right, coloring.color[e]) = e;
    ++size[coloring.color[e]];
  }

  while (true) {
    const auto big = static_cast<std::uint32_t>(
        std::max_element(size.begin(), size.end()) - size.begin());
    const auto small = static_cast<std::uint32_t>(
        std::min_element(size.begin(), size.end()) - size.begin());
    if (size[big] <= size[small] + 1) break;

    // Some big/small path component has one more `big` edge than `small`
    // edges; both its ends lack `small`. Swapping it moves one edge across.
    bool moved = false;
    for (std::uint32_t side = 0; side < 2 && !moved; ++side) {
      for (GroupId v = 0; v < graph.groups && !moved; ++v) {
        const bool left = side == 0;
        const std::uint32_t has_big = left ? table.left(v, big) : table.right(v, big);
        const std::uint32_t has_small = left ? table.left(v, small) : table.right(v, small);
        if (has_big == kFree || has_small != kFree) continue;
        const auto path = alternating_path(graph, table, v, left, big, small);
        if (path.size() % 2 == 1) {
          swap_path_colors(graph, table, coloring.color, path, big, small);
          --size[big];
          ++size[small];
          moved = true;
        }
      }
    }
    if (!moved) throw InvariantViolation("colour rebalancing found no augmenting path");
  }
  return coloring;
}

bool is_proper_coloring(const GroupMultigraph& graph, const EdgeColoring& coloring) {
  if (coloring.color.size() != graph.edges.size()) return false;
  std::vector<std::uint8_t> left(std::size_t{graph.groups} * coloring.colors, 0);
  std::vector<std::uint8_t> right(std::size_t{graph.groups} * coloring.colors, 0);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const std::uint32_t c = coloring.color[e];
    if (c >= coloring.colors) return false;
    auto& l = left[std::size_t{graph.edges[e].left} * coloring.colors + c];
    auto& r = right[std::size_t{graph.edges[e].right} * coloring.colors + c];
    if (l || r) return false;
    l = r = 1;
  }
  return true;
}

// ---------------------------------------------------------------------------

OfflineSchedule plan_offline(std::span<const ProcessorId> perm, const NetworkConfig& cfg) {
  const auto graph = GroupMultigraph::from_permutation(perm, cfg);
  const std::uint32_t d = cfg.d();
  const std::uint32_t g = cfg.g();

  OfflineSchedule schedule;
  schedule.cfg = cfg;
  schedule.itineraries.resize(perm.size());
  for (PacketId i = 0; i < perm.size(); ++i) {
    schedule.itineraries[i].packet = i;
    schedule.itineraries[i].source = i;
    schedule.itineraries[i].dest = perm[i];
  }

  if (d == 1) {
    schedule.direct = true;
    schedule.batches = 1;
    return schedule;
  }

  EdgeColoring coloring = edge_color_bipartite(graph);
  if (d >= g) {
    schedule.batches = (coloring.colors + g - 1) / g;
    for (std::uint32_t e = 0; e < graph.edges.size(); ++e) {
      auto& it = schedule.itineraries[graph.edges[e].packet];
      it.batch = coloring.color[e] / g;
      it.intermediate = coloring.color[e] % g;
      it.relay = it.intermediate * d + graph.edges[e].left;
    }
  } else {
    coloring = balance_coloring(graph, std::move(coloring), g);
    schedule.batches = 1;
    std::vector<std::uint32_t> next_relay(g, 0);
    for (std::uint32_t e = 0; e < graph.edges.size(); ++e) {
      auto& it = schedule.itineraries[graph.edges[e].packet];
      it.batch = 0;
      it.intermediate = coloring.color[e];
      it.relay = it.intermediate * d + next_relay[it.intermediate]++;
    }
  }
  return schedule;
}

OfflineResult route_offline(std::span<const ProcessorId> perm, SlotEngine& engine) {
  const NetworkConfig& cfg = engine.config();
  OfflineResult result;
  result.schedule = plan_offline(perm, cfg);
  const auto& schedule = result.schedule;
  const std::uint32_t d = cfg.d();
  const std::uint32_t n = cfg.n();
  constexpr PacketId kNone = std::numeric_limits<PacketId>::max();
  result.placement.assign(n, kNone);

  auto copy_of = [&](const Itinerary& it) {
    return Message{MessageKind::Copy, it.packet,
                   {it.source, it.dest, it.intermediate, cfg.delta(it.dest)}};
  };
  auto check = [&](const SlotOutcome& out) {
    if (out.conflict_count() != 0) {
      throw InvariantViolation("offline schedule produced a coupler conflict");
    }
    ++result.stats.slots;
  };
  auto deliver = [&](const SlotOutcome& out) {
    for (const auto& rx : out.receptions()) {
      if (rx.message.header.dest != rx.listener) continue;
      if (result.placement[rx.listener] != kNone) {
        throw InvariantViolation("processor received two packets");
      }
      result.placement[rx.listener] = rx.message.packet;
    }
  };

  SlotPlan plan;
  if (schedule.direct) {
    for (const auto& it : schedule.itineraries) {
      plan.send(it.source, copy_of(it), it.dest / d);
      plan.listen(it.dest, it.source / d);
    }
    const SlotOutcome& out = engine.execute(plan);
    check(out);
    deliver(out);
  } else {
    std::vector<std::vector<const Itinerary*>> by_batch(schedule.batches);
    for (const auto& it : schedule.itineraries) by_batch[it.batch].push_back(&it);

    std::vector<Reception> held;
    for (const auto& batch : by_batch) {
      plan.clear();
      for (const Itinerary* it : batch) {
        plan.send(it->source, copy_of(*it), it->intermediate);
        plan.listen(it->relay, it->source / d);
      }
      const SlotOutcome& hop1 = engine.execute(plan);
      check(hop1);
      held.assign(hop1.receptions().begin(), hop1.receptions().end());
      if (held.size() != batch.size()) {
        throw InvariantViolation("a relay missed its packet");
      }

      plan.clear();
      for (const auto& h : held) {
        plan.send(h.listener, h.message, h.message.header.dest / d);
        plan.listen(h.message.header.dest, h.listener / d);
      }
      const SlotOutcome& hop2 = engine.execute(plan);
      check(hop2);
      deliver(hop2);
    }
  }

  for (ProcessorId j = 0; j < n; ++j) {
    const PacketId p = result.placement[j];
    if (p == kNone || perm[p] != j) {
      throw InvariantViolation("offline routing left processor " + std::to_string(j) +
                               " without its packet");
    }
  }
  result.stats.iterations = schedule.slot_count() > 0 ? 1 : 0;
  result.stats.slots_per_step = schedule.slot_count();
  return result;
}

OfflineResult route_offline(std::span<const ProcessorId> perm, const NetworkConfig& cfg) {
  SlotEngine engine(cfg);
  return route_offline(perm, engine);
}

std::string schedule_to_json(const OfflineSchedule& schedule) {
  nlohmann::json doc;
  doc["d"] = schedule.cfg.d();
  doc["g"] = schedule.cfg.g();
  doc["direct"] = schedule.direct;
  doc["slots"] = schedule.slot_count();
  doc["batches"] = schedule.batches;
  auto& list = doc["itineraries"] = nlohmann::json::array();
  for (const auto& it : schedule.itineraries) {
    nlohmann::json row{{"packet", it.packet}, {"source", it.source}, {"dest", it.dest}};
    if (!schedule.direct) {
      row["batch"] = it.batch;
      row["intermediate"] = it.intermediate;
      row["relay"] = it.relay;
    }
    list.push_back(std::move(row));
  }
  return doc.dump(2) + "\n";
}

}  // namespace pops
