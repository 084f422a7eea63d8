#include "pops/sorting_network.hpp"

#include <algorithm>
#include <bit>
#include <string>
#include <utility>

#include <json.hpp>

#include "pops/errors.hpp"
#include "pops/offline_router.hpp"
#include "pops/permutation.hpp"

namespace pops {

std::size_t ComparatorNetwork::comparator_count() const noexcept {
  std::size_t total = 0;
  for (const auto& s : stages) total += s.size();
  return total;
}

void validate_stage(const ComparatorStage& stage, std::uint32_t width) {
  std::vector<std::uint8_t> used(width, 0);
  for (const auto& c : stage) {
    if (c.i >= width || c.j >= width) throw ContractError("comparator endpoint out of range");
    if (c.i == c.j) throw ContractError("comparator joins a position to itself");
    if (used[c.i] || used[c.j]) throw ContractError("comparators in a stage overlap");
    used[c.i] = used[c.j] = 1;
  }
}

ComparatorNetwork batcher_network(std::uint32_t n) {
  if (n < 2 || !std::has_single_bit(n)) {
    throw DomainError("odd-even merge sort needs n = 2^k with k >= 1");
  }
  ComparatorNetwork net;
  net.width = n;
  for (std::uint32_t p = 1; p < n; p <<= 1) {
    for (std::uint32_t k = p; k >= 1; k >>= 1) {
      ComparatorStage stage;
      for (std::uint32_t j = k % p; j + k < n; j += 2 * k) {
        for (std::uint32_t i = 0; i < std::min(k, n - j - k); ++i) {
          if ((i + j) / (2 * p) == (i + j + k) / (2 * p)) {
            stage.push_back({i + j, i + j + k});
          }
        }
      }
      net.stages.push_back(std::move(stage));
    }
  }
  return net;
}

std::string network_to_json(const ComparatorNetwork& network) {
  nlohmann::json doc;
  doc["width"] = network.width;
  doc["stage_count"] = network.stages.size();
  doc["comparator_count"] = network.comparator_count();
  auto& stages = doc["stages"] = nlohmann::json::array();
  for (const auto& s : network.stages) {
    auto row = nlohmann::json::array();
    for (const auto& c : s) row.push_back({c.i, c.j});
    stages.push_back(std::move(row));
  }
  return doc.dump() + "\n";
}

std::uint64_t simulate_stage(const ComparatorStage& stage, std::span<KeyedRecord> records,
                             SlotEngine& engine) {
  const std::uint32_t n = engine.config().n();
  if (records.size() != n) throw ValidationError("one record per processor is required");
  validate_stage(stage, n);
  if (stage.empty()) return 0;

  std::vector<ProcessorId> involution(n);
  for (ProcessorId x = 0; x < n; ++x) involution[x] = x;
  for (const auto& c : stage) {
    involution[c.i] = c.j;
    involution[c.j] = c.i;
  }

  // Packet x carries the record sitting at processor x.
  const OfflineResult routed = route_offline(involution, engine);
  std::vector<KeyedRecord> before(records.begin(), records.end());
  for (const auto& c : stage) {
    const ProcessorId lo = std::min(c.i, c.j);
    const ProcessorId hi = std::max(c.i, c.j);
    // Each end compares its own record with the one that just arrived.
    const KeyedRecord& at_lo_incoming = before[routed.placement[lo]];
    const KeyedRecord& at_hi_incoming = before[routed.placement[hi]];
    const KeyedRecord& own_lo = before[lo];
    const KeyedRecord& own_hi = before[hi];
    records[lo] = at_lo_incoming.key < own_lo.key ? at_lo_incoming : own_lo;
    records[hi] = own_hi.key < at_hi_incoming.key ? at_hi_incoming : own_hi;
  }
  return routed.stats.slots;
}

std::uint64_t simulate_stage(const ComparatorStage& stage, std::span<KeyedRecord> records,
                             const NetworkConfig& cfg) {
  SlotEngine engine(cfg);
  return simulate_stage(stage, records, engine);
}

namespace {

void require_sorting_shape(const NetworkConfig& cfg) {
  if (cfg.d() != cfg.g()) {
    throw ValidationError("sorting on POPS is supported only for d = g");
  }
  if (cfg.g() < 2 || !std::has_single_bit(cfg.g())) {
    throw ValidationError("sorting on POPS(g,g) needs g to be a power of two >= 2");
  }
}

}  // namespace

std::uint64_t sort_slot_count(const NetworkConfig& cfg) {
  require_sorting_shape(cfg);
  const std::uint64_t lg = std::countr_zero(cfg.g());
  return 4 * lg * lg + 2 * lg;
}

SortResult sort_on_pops(std::vector<KeyedRecord> records, const NetworkConfig& cfg) {
  require_sorting_shape(cfg);
  if (records.size() != cfg.n()) {
    throw ValidationError("sort_on_pops needs exactly n = g^2 records");
  }
  const ComparatorNetwork net = batcher_network(cfg.n());
  SlotEngine engine(cfg);
  SortResult result;
  for (const auto& stage : net.stages) {
    result.slots += simulate_stage(stage, records, engine);
  }
  result.records = std::move(records);
  return result;
}

SortRouteResult route_by_sorting(std::span<const ProcessorId> perm, const NetworkConfig& cfg) {
  require_sorting_shape(cfg);
  validate_permutation(perm, cfg.n());

  std::vector<KeyedRecord> records(cfg.n());
  for (PacketId i = 0; i < cfg.n(); ++i) records[i] = {static_cast<std::int64_t>(perm[i]), i};
  SortResult sorted = sort_on_pops(std::move(records), cfg);

  SortRouteResult out;
  out.placement.resize(cfg.n());
  for (ProcessorId j = 0; j < cfg.n(); ++j) {
    const auto& r = sorted.records[j];
    if (r.key != static_cast<std::int64_t>(j) || perm[r.payload] != j) {
      throw InvariantViolation("routing by sorting misplaced the packet for processor " +
                               std::to_string(j));
    }
    out.placement[j] = static_cast<PacketId>(r.payload);
  }
  out.stats.slots = sorted.slots;
  out.stats.iterations = static_cast<std::uint32_t>(batcher_network(cfg.n()).stages.size());
  out.stats.slots_per_step = 2;
  return out;
}

}  // namespace pops
