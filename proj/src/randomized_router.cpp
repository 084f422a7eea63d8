#include "pops/randomized_router.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "pops/errors.hpp"
#include "pops/permutation.hpp"
#include "pops/rng.hpp"

namespace pops {

std::uint32_t slots_per_step(StepProtocol protocol) noexcept {
  return protocol == StepProtocol::Paper5 ? 5 : 6;
}

std::uint32_t ParticipationSchedule::phase1_steps(const NetworkConfig& cfg) const {
  if (cfg.d() <= cfg.g()) return 0;
  const double ratio = static_cast<double>(cfg.d()) / static_cast<double>(cfg.g());
  return static_cast<std::uint32_t>(std::ceil(c_eps * (ratio - 1.0)));
}

double participation_probability(std::uint32_t s, const NetworkConfig& cfg,
                                 const ParticipationSchedule& schedule) {
  if (s == 0) throw DomainError("steps are numbered from 1");
  if (s > schedule.phase1_steps(cfg)) return 1.0;
  const double bound = schedule_degree_bound(s, cfg, schedule.c_eps);
  if (bound <= static_cast<double>(cfg.g())) return 1.0;
  return static_cast<double>(cfg.g()) / bound;
}

// ---------------------------------------------------------------------------

RoutingState::RoutingState(const NetworkConfig& cfg, std::vector<ProcessorId> perm,
                           StateOptions options)
    : cfg_(cfg), perm_(std::move(perm)), options_(options), engine_(cfg) {
  validate_permutation(perm_, cfg_.n());
  if (cfg_.d() < cfg_.g()) {
    throw DomainError("randomized routing needs d >= g (relay x*d+a must exist for a < g)");
  }
  const std::uint32_t n = cfg_.n();
  pending_.resize(n);
  for (PacketId i = 0; i < n; ++i) pending_[i] = i;
  original_.assign(n, 1);
  received_.assign(n, kNone);
  occupancy_.assign(n, 1);
  mark_.assign(n, 0);
  backoff_.assign(n, 0);
  max_occupancy_ = 1;
}

RoutingState::RoutingState(const NetworkConfig& cfg, std::vector<ProcessorId> perm,
                           std::span<const PacketId> pending, StateOptions options)
    : RoutingState(cfg, std::move(perm), options) {
  const std::uint32_t n = cfg_.n();
  std::vector<std::uint8_t> keep(n, 0);
  for (PacketId id : pending) {
    if (id >= n) throw ValidationError("pending packet id out of range");
    keep[id] = 1;
  }
  pending_.clear();
  max_occupancy_ = 0;
  for (PacketId i = 0; i < n; ++i) {
    occupancy_[i] = 0;
  }
  for (PacketId i = 0; i < n; ++i) {
    if (keep[i]) {
      pending_.push_back(i);
      ++occupancy_[i];
    } else {
      original_[i] = 0;
      received_[perm_[i]] = i;
      if (!options_.immediate_exit) ++occupancy_[perm_[i]];
    }
  }
  for (PacketId i = 0; i < n; ++i) {
    max_occupancy_ = std::max<std::uint32_t>(max_occupancy_, occupancy_[i]);
  }
}

std::vector<PendingPacket> RoutingState::pending_packets() const {
  std::vector<PendingPacket> out;
  out.reserve(pending_.size());
  for (PacketId id : pending_) out.push_back({id, id, perm_[id]});
  return out;
}

std::optional<PacketId> RoutingState::received_at(ProcessorId p) const {
  const PacketId id = received_.at(p);
  if (id == kNone) return std::nullopt;
  return id;
}

// ---------------------------------------------------------------------------

// One step over a RoutingState. Each slot builds a plan from processor-local
// knowledge only, runs it through the engine and updates buffers from the
// receptions.
class StepRunner {
 public:
  StepRunner(RoutingState& state, const StepControl& control)
      : st_(state),
        ctl_(control),
        cfg_(state.cfg_),
        d_(cfg_.d()),
        g_(cfg_.g()),
        relay_count_(std::min(d_, g_)) {}

  StepMetrics run();

 private:
  struct Held {
    ProcessorId holder;
    Message message;
  };

  const SlotOutcome& execute(std::uint8_t slot);
  void acquire(ProcessorId p);
  void release(ProcessorId p) { --st_.occupancy_[p]; }
  std::uint32_t occupancy_limit() const { return st_.options_.immediate_exit ? 2 : 3; }

  void slot_launch();
  void slot_to_temp();
  void slot_deliver(std::uint8_t slot);
  void listen_relays();

  RoutingState& st_;
  const StepControl& ctl_;
  const NetworkConfig& cfg_;
  const std::uint32_t d_;
  const std::uint32_t g_;
  const std::uint32_t relay_count_;

  SlotPlan plan_;
  StepMetrics m_;

  std::vector<Held> launched_;     // sources that sent a copy, with their header
  std::vector<Held> relayed_;      // copies held by relays after slot 1
  std::vector<Held> staged_;       // copies held in temporary destination groups
  std::vector<Held> delivered_;    // (destination, copy) accepted this step
  std::vector<Held> acked_;        // processors that received an ack in the last slot
  std::vector<PacketId> deleted_;  // originals deleted this step
};

const SlotOutcome& StepRunner::execute(std::uint8_t slot) {
  const SlotOutcome& out = st_.engine_.execute(plan_);
  m_.conflicts.push_back(out.conflict_count());
  if (st_.options_.record_trace) {
    for (const auto& tx : plan_.transmissions()) {
      const GroupId src = tx.sender / d_;
      for (GroupId dest : plan_.targets(tx)) {
        const CouplerId c{dest, src};
        st_.trace_.push_back({m_.step, slot, tx.sender, c, tx.message, out.status(c)});
      }
    }
  }
  ++st_.slots_;
  return out;
}

void StepRunner::acquire(ProcessorId p) {
  const std::uint32_t occ = ++st_.occupancy_[p];
  if (occ > m_.max_buffer_occupancy) m_.max_buffer_occupancy = occ;
  if (occ > occupancy_limit()) {
    throw InvariantViolation("processor " + std::to_string(p) + " holds " +
                             std::to_string(occ) + " packets");
  }
}

void StepRunner::listen_relays() {
  for (GroupId x = 0; x < g_; ++x) {
    for (std::uint32_t a = 0; a < relay_count_; ++a) plan_.listen(x * d_ + a, a);
  }
}

// Slot 1: every participating source sends a copy towards a random
// intermediate group; relay x*d+a picks up what arrives on c(x, a).
void StepRunner::slot_launch() {
  const std::uint32_t step = m_.step;

  std::vector<double> group_p;
  if (ctl_.adaptive) {
    std::vector<std::uint32_t> per_group(g_, 0);
    for (PacketId id : st_.pending_) ++per_group[id / d_];
    group_p.resize(g_);
    double sum = 0.0;
    std::uint32_t busy = 0;
    for (GroupId a = 0; a < g_; ++a) {
      group_p[a] = per_group[a] == 0
                       ? 1.0
                       : std::min(1.0, static_cast<double>(g_) / per_group[a]);
      if (per_group[a] > 0) {
        sum += group_p[a];
        ++busy;
      }
    }
    m_.participation = busy == 0 ? 1.0 : sum / busy;
  } else {
    m_.participation = ctl_.participation;
  }

  plan_.clear();
  for (PacketId id : st_.pending_) {
    const ProcessorId src = id;
    const GroupId a = src / d_;
    const double p = ctl_.adaptive ? group_p[a] : ctl_.participation;
    if (p < 1.0 && !derive_bernoulli(RandomKey{ctl_.seed, id, step, Purpose::Coin}, p)) {
      continue;
    }
    if (st_.backoff_[id]) {
      if (!derive_bernoulli(RandomKey{ctl_.seed, id, step, Purpose::Backoff}, 0.5)) continue;
      st_.backoff_[id] = 0;
    }
    const GroupId r = derive_uniform_group(RandomKey{ctl_.seed, id, step, Purpose::Color}, g_);
    const ProcessorId dest = st_.perm_[id];
    const Message copy{MessageKind::Copy, id, {src, dest, r, dest % g_}};
    plan_.send(src, copy, r);
    launched_.push_back({src, copy});
  }
  m_.participants = static_cast<std::uint32_t>(launched_.size());
  listen_relays();

  const SlotOutcome& out = execute(1);
  for (const auto& rx : out.receptions()) {
    relayed_.push_back({rx.listener, rx.message});
    acquire(rx.listener);
  }
  m_.slot1_survivors = static_cast<std::uint32_t>(relayed_.size());
}

// Slot 2: relays forward to the temporary destination group; processor t*d+x
// picks up what arrives on c(t, x).
void StepRunner::slot_to_temp() {
  plan_.clear();
  for (const auto& h : relayed_) plan_.send(h.holder, h.message, h.message.header.temp_dest);
  listen_relays();
  const SlotOutcome& out = execute(2);
  // Relays keep only the header once the payload has left.
  for (const auto& h : relayed_) release(h.holder);
  for (const auto& rx : out.receptions()) {
    staged_.push_back({rx.listener, rx.message});
    acquire(rx.listener);
  }
  m_.slot2_survivors = static_cast<std::uint32_t>(staged_.size());
}

// Copy from the temporary destination group to the final destination. Every
// processor listens on c(group(j), Delta(j)); only the addressee keeps it.
void StepRunner::slot_deliver(std::uint8_t slot) {
  plan_.clear();
  for (const auto& h : staged_) {
    plan_.send(h.holder, h.message, h.message.header.dest / d_);
  }
  const std::uint32_t n = cfg_.n();
  for (ProcessorId j = 0; j < n; ++j) plan_.listen(j, j % g_);
  const SlotOutcome& out = execute(slot);
  for (const auto& h : staged_) release(h.holder);
  for (const auto& rx : out.receptions()) {
    if (rx.message.header.dest != rx.listener) continue;  // overheard broadcast
    if (st_.received_[rx.listener] != RoutingState::kNone) {
      ++m_.duplicates;
    } else {
      st_.received_[rx.listener] = rx.message.packet;
      if (!st_.options_.immediate_exit) acquire(rx.listener);
      ++m_.deliveries;
    }
    delivered_.push_back({rx.listener, rx.message});
  }
}

StepMetrics StepRunner::run() {
  m_.step = st_.steps_ + 1;
  m_.pending = static_cast<std::uint32_t>(st_.pending_.size());
  {
    const auto graph = build_conflict_graph(st_.pending_packets(), cfg_);
    m_.max_left_degree = graph.max_left_degree();
    m_.max_right_degree = graph.max_right_degree();
    m_.lambda = static_cast<double>(graph.max_degree()) / g_;
  }

  auto delete_originals = [&](const SlotOutcome& out) {
    for (const auto& rx : out.receptions()) {
      const PacketId id = rx.message.packet;
      if (rx.message.kind == MessageKind::Nack) {
        st_.backoff_[id] = 1;
        continue;
      }
      if (rx.message.header.source != rx.listener || !st_.original_[id]) {
        throw InvariantViolation("ack reached a processor without the original");
      }
      st_.original_[id] = 0;
      release(rx.listener);
      deleted_.push_back(id);
    }
  };

  auto& mark = st_.mark_;
  slot_launch();
  slot_to_temp();

  if (ctl_.protocol == StepProtocol::Paper5) {
    // Slot 3: temporary holder acks back to the relay that fed it.
    plan_.clear();
    for (const auto& h : staged_) {
      plan_.send(h.holder, {MessageKind::Ack, h.message.packet, h.message.header},
                 h.message.header.intermediate);
    }
    for (const auto& h : relayed_) plan_.listen(h.holder, h.message.header.temp_dest);
    const SlotOutcome& s3 = execute(3);
    for (const auto& rx : s3.receptions()) acked_.push_back({rx.listener, rx.message});

    // Slot 4: relay acks the source, which deletes its original.
    plan_.clear();
    for (const auto& h : acked_) {
      plan_.send(h.holder, h.message, h.message.header.source / d_);
    }
    for (const auto& h : launched_) plan_.listen(h.holder, h.message.header.intermediate);
    delete_originals(execute(4));

    slot_deliver(5);
  } else {
    slot_deliver(3);

    // Slot 4: destination acks the temporary holder over the reverse coupler.
    plan_.clear();
    for (const auto& h : delivered_) {
      plan_.send(h.holder, {MessageKind::Ack, h.message.packet, h.message.header},
                 h.message.header.temp_dest);
    }
    for (const auto& h : staged_) plan_.listen(h.holder, h.message.header.dest / d_);
    const SlotOutcome& s4 = execute(4);
    for (const auto& rx : s4.receptions()) mark[rx.message.packet] = 4;

    // Slot 5: temporary holder acks the relay, or nacks it if slot 4 was silent.
    plan_.clear();
    for (const auto& h : staged_) {
      const bool ok = mark[h.message.packet] == 4;
      mark[h.message.packet] = 0;
      plan_.send(h.holder,
                 {ok ? MessageKind::Ack : MessageKind::Nack, h.message.packet, h.message.header},
                 h.message.header.intermediate);
    }
    for (const auto& h : relayed_) plan_.listen(h.holder, h.message.header.temp_dest);
    const SlotOutcome& s5 = execute(5);
    acked_.clear();
    for (const auto& rx : s5.receptions()) acked_.push_back({rx.listener, rx.message});

    // Slot 6: relay acks the source, which deletes its original.
    plan_.clear();
    for (const auto& h : acked_) {
      plan_.send(h.holder, h.message, h.message.header.source / d_);
    }
    for (const auto& h : launched_) plan_.listen(h.holder, h.message.header.intermediate);
    delete_originals(execute(6));

    for (std::size_t k = 3; k < 6; ++k) {
      if (m_.conflicts[k] != 0) {
        throw InvariantViolation("ack slot " + std::to_string(k + 1) + " conflicted");
      }
    }
  }

  // Deleted at the source iff delivered at the destination.
  for (const auto& h : delivered_) mark[h.message.packet] |= 1;
  for (PacketId id : deleted_) mark[id] |= 2;
  for (PacketId id : deleted_) {
    if (mark[id] != 3) {
      ++m_.losses;
      if (ctl_.loss_policy == LossPolicy::Abort) {
        throw LossDetected("packet " + std::to_string(id) + " was acknowledged in step " +
                           std::to_string(m_.step) + " but never reached processor " +
                           std::to_string(st_.perm_[id]));
      }
      // Omniscient repair: the packet reappears at its source.
      st_.original_[id] = 1;
      st_.backoff_[id] = 1;
      acquire(id);
    }
  }
  for (const auto& h : delivered_) {
    if (mark[h.message.packet] == 1) ++m_.unacked_deliveries;
  }
  for (const auto& h : delivered_) mark[h.message.packet] = 0;
  for (PacketId id : deleted_) mark[id] = 0;

  std::erase_if(st_.pending_, [&](PacketId id) { return st_.original_[id] == 0; });
  ++st_.steps_;
  st_.max_occupancy_ = std::max(st_.max_occupancy_, m_.max_buffer_occupancy);
  return m_;
}

StepMetrics run_step(RoutingState& state, const StepControl& control) {
  if (!(control.participation > 0.0 && control.participation <= 1.0)) {
    throw DomainError("participation probability must lie in (0, 1]");
  }
  StepRunner runner(state, control);
  return runner.run();
}

// ---------------------------------------------------------------------------

RunStats route_randomized(RoutingState& state, const RouterOptions& options,
                          std::uint64_t seed) {
  RunStats stats;
  stats.seed = seed;
  stats.slots_per_step = slots_per_step(options.protocol);
  const std::uint64_t slots_before = state.slots_done();

  const bool paper5 = options.protocol == StepProtocol::Paper5;
  StepControl control;
  control.protocol = options.protocol;
  control.adaptive = options.schedule.mode == ScheduleMode::Adaptive;
  control.loss_policy = options.loss_policy;
  control.seed = seed;

  while (!state.done()) {
    if (stats.iterations >= options.max_steps) {
      throw InvariantViolation("routing did not finish within " +
                               std::to_string(options.max_steps) + " steps");
    }
    const std::uint32_t s = state.steps_done() + 1;
    control.participation = participation_probability(s, state.config(), options.schedule);
    StepMetrics m = run_step(state, control);

    stats.conflicts_slot1 += m.conflicts[0];
    stats.conflicts_slot2 += m.conflicts[1];
    if (paper5) {
      stats.conflicts_ack += m.conflicts[2] + m.conflicts[3];
      stats.conflicts_delivery += m.conflicts[4];
    } else {
      stats.conflicts_delivery += m.conflicts[2];
      stats.conflicts_ack += m.conflicts[3] + m.conflicts[4] + m.conflicts[5];
    }
    stats.losses += m.losses;
    stats.duplicates += m.duplicates;
    stats.per_step.push_back(std::move(m));
    ++stats.iterations;
  }
  stats.slots = state.slots_done() - slots_before;
  stats.max_buffer_occupancy = state.max_buffer_occupancy();
  return stats;
}

RunStats route_randomized(std::span<const ProcessorId> perm, const NetworkConfig& cfg,
                          const RouterOptions& options, std::uint64_t seed) {
  RoutingState state(cfg, std::vector<ProcessorId>(perm.begin(), perm.end()), options.state);
  return route_randomized(state, options, seed);
}

}  // namespace pops
