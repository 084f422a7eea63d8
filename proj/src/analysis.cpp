#include "pops/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "pops/errors.hpp"

namespace pops {

std::uint32_t ConflictGraph::max_left_degree() const noexcept {
  return left_degree.empty() ? 0 : *std::max_element(left_degree.begin(), left_degree.end());
}

std::uint32_t ConflictGraph::max_right_degree() const noexcept {
  return right_degree.empty() ? 0
                              : *std::max_element(right_degree.begin(), right_degree.end());
}

std::uint32_t ConflictGraph::max_degree() const noexcept {
  return std::max(max_left_degree(), max_right_degree());
}

ConflictGraph build_conflict_graph(std::span<const PendingPacket> pending,
                                   const NetworkConfig& cfg) {
  ConflictGraph graph;
  graph.left_degree.assign(cfg.g(), 0);
  graph.right_degree.assign(cfg.g(), 0);
  graph.edges.reserve(pending.size());
  for (const auto& p : pending) {
    const GroupId a = cfg.group_of(p.location);
    const GroupId b = cfg.delta(p.dest);
    ++graph.left_degree[a];
    ++graph.right_degree[b];
    graph.edges.push_back({p.id, a, b});
  }
  return graph;
}

double schedule_degree_bound(std::uint32_t s, const NetworkConfig& cfg, double c_eps) {
  if (s == 0) throw DomainError("steps are numbered from 1");
  return static_cast<double>(cfg.d()) -
         static_cast<double>(cfg.g()) * static_cast<double>(s - 1) / c_eps;
}

std::uint32_t first_schedule_overrun(const RunStats& run, const NetworkConfig& cfg,
                                     double c_eps) {
  if (cfg.d() <= cfg.g()) return 0;
  const double ratio = static_cast<double>(cfg.d()) / static_cast<double>(cfg.g());
  const auto phase1 = static_cast<std::uint32_t>(std::ceil(c_eps * (ratio - 1.0)));
  // per_step[s] holds the degrees seen at the start of step s + 1.
  for (std::uint32_t s = 1; s <= phase1 && s < run.per_step.size(); ++s) {
    const StepMetrics& next = run.per_step[s];
    const double observed = std::max(next.max_left_degree, next.max_right_degree);
    if (observed > schedule_degree_bound(s + 1, cfg, c_eps)) return s;
  }
  return 0;
}

std::uint64_t baseline_ds_slots(const NetworkConfig& cfg) {
  const std::uint32_t g = cfg.g();
  if (!std::has_single_bit(g)) {
    throw DomainError("baseline formula needs g to be a power of two");
  }
  const std::uint64_t lg = std::countr_zero(g);
  const std::uint64_t per_round = 4 * lg * lg + 2 * lg + 21;
  const std::uint64_t scaled = (per_round * cfg.d() + g - 1) / g;
  return scaled + 3 * lg + 7;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw DomainError("cannot summarize an empty sample");
  Summary s;
  double sum = 0.0;
  s.max = values.front();
  for (double v : values) {
    sum += v;
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.sigma = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

RunAggregate aggregate_stats(std::span<const RunStats> runs) {
  if (runs.empty()) throw DomainError("cannot aggregate zero runs");
  auto column = [&](auto field) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(static_cast<double>(field(r)));
    return summarize(v);
  };
  RunAggregate agg;
  agg.runs = runs.size();
  agg.iterations = column([](const RunStats& r) { return r.iterations; });
  agg.slots = column([](const RunStats& r) { return r.slots; });
  agg.conflicts_slot1 = column([](const RunStats& r) { return r.conflicts_slot1; });
  agg.conflicts_slot2 = column([](const RunStats& r) { return r.conflicts_slot2; });
  agg.conflicts_ack = column([](const RunStats& r) { return r.conflicts_ack; });
  agg.conflicts_delivery = column([](const RunStats& r) { return r.conflicts_delivery; });
  return agg;
}

}  // namespace pops
