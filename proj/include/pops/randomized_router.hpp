#pragma once

// Randomized online permutation routing on POPS(d,g), d >= g.
//
// Every step, each pending packet (optionally after a participation coin)
// picks a uniformly random intermediate group r and travels
//   source -> relay in r -> temporary destination group Delta(dest) -> dest.
// Listening conventions: in the copy slots towards relays and temporary
// destination groups, processor x*d + a (a < g) is the only listener of
// coupler c(x, a); in the final-delivery slot processor j listens to
// c(group(j), Delta(j)).
//
// Two step layouts are provided:
//   Paper5    copy->r, copy->temp, ack temp->r, ack r->source (source deletes),
//             copy temp->dest. Lossless only when d == g.
//   Reversal6 copy->r, copy->temp, copy temp->dest, then three acks retracing
//             the path; the source deletes only once the destination holds
//             the packet. Lossless for every d >= g.
//
// When d > g two packets may share both temporary group and final group, so
// their delivery copies use the same coupler. Under Reversal6 the temporary
// holder that gets no ack in slot 4 sends a nack back along the ack path, and
// the source halves its participation probability on its next attempt.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pops/analysis.hpp"
#include "pops/network.hpp"

namespace pops {

enum class StepProtocol : std::uint8_t { Paper5, Reversal6 };

std::uint32_t slots_per_step(StepProtocol protocol) noexcept;

enum class ScheduleMode : std::uint8_t { Fixed, Adaptive };

// Participation coins used when d > g. In Fixed mode step s uses
// min(1, g / (d - g(s-1)/c_eps)) during the first ceil(c_eps (d/g - 1))
// steps and 1 afterwards. Adaptive mode lets each group use
// min(1, g / its own pending count).
struct ParticipationSchedule {
  double c_eps = 4.0;
  ScheduleMode mode = ScheduleMode::Fixed;

  std::uint32_t phase1_steps(const NetworkConfig& cfg) const;
};

double participation_probability(std::uint32_t s, const NetworkConfig& cfg,
                                 const ParticipationSchedule& schedule);

enum class LossPolicy : std::uint8_t {
  Abort,   // throw LossDetected
  Repair,  // put the original back at its source and count the loss
};

struct StateOptions {
  // Delivered packets leave the processor at once instead of occupying a
  // buffer, which lowers the occupancy bound from 3 to 2.
  bool immediate_exit = false;
  bool record_trace = false;
};

struct TraceEvent {
  std::uint32_t step;
  std::uint8_t slot;  // 1-based within the step
  ProcessorId sender;
  CouplerId coupler;
  Message message;
  CouplerStatus status;
};

// Processor-local buffers plus the omniscient bookkeeping the harness uses to
// detect termination and verify invariants.
class RoutingState {
 public:
  // All n packets pending. Throws ValidationError unless perm is a bijection
  // on [0, n), DomainError unless d >= g.
  RoutingState(const NetworkConfig& cfg, std::vector<ProcessorId> perm,
               StateOptions options = {});
  // Only the listed packets pending; the rest count as already delivered.
  RoutingState(const NetworkConfig& cfg, std::vector<ProcessorId> perm,
               std::span<const PacketId> pending, StateOptions options = {});

  const NetworkConfig& config() const noexcept { return cfg_; }
  std::span<const ProcessorId> permutation() const noexcept { return perm_; }
  const StateOptions& options() const noexcept { return options_; }

  std::uint32_t steps_done() const noexcept { return steps_; }
  std::uint64_t slots_done() const noexcept { return slots_; }
  std::size_t pending_count() const noexcept { return pending_.size(); }
  bool done() const noexcept { return pending_.empty(); }

  std::vector<PendingPacket> pending_packets() const;
  bool has_original(ProcessorId p) const { return original_.at(p) != 0; }
  // Packet stored at destination p, if it has arrived.
  std::optional<PacketId> received_at(ProcessorId p) const;
  std::uint32_t buffer_occupancy(ProcessorId p) const { return occupancy_.at(p); }
  std::uint32_t max_buffer_occupancy() const noexcept { return max_occupancy_; }

  std::span<const TraceEvent> trace() const noexcept { return trace_; }
  void clear_trace() noexcept { trace_.clear(); }

 private:
  friend class StepRunner;

  static constexpr PacketId kNone = 0xFFFFFFFFu;

  NetworkConfig cfg_;
  std::vector<ProcessorId> perm_;
  StateOptions options_;
  SlotEngine engine_;

  std::vector<PacketId> pending_;
  std::vector<std::uint8_t> original_;
  std::vector<PacketId> received_;
  std::vector<std::uint8_t> occupancy_;
  std::vector<std::uint8_t> mark_;  // per-step scratch, all zero between steps
  std::vector<std::uint8_t> backoff_;  // source saw a nack since its last attempt
  std::uint32_t max_occupancy_ = 0;
  std::uint32_t steps_ = 0;
  std::uint64_t slots_ = 0;
  std::vector<TraceEvent> trace_;
};

struct StepControl {
  StepProtocol protocol = StepProtocol::Reversal6;
  double participation = 1.0;  // ignored in adaptive mode
  bool adaptive = false;
  LossPolicy loss_policy = LossPolicy::Abort;
  std::uint64_t seed = 0;
};

// Executes one full step (5 or 6 slots). Throws LossDetected under
// LossPolicy::Abort, InvariantViolation if a buffer bound is exceeded or an
// ack slot conflicts under Reversal6.
StepMetrics run_step(RoutingState& state, const StepControl& control);

struct RouterOptions {
  StepProtocol protocol = StepProtocol::Reversal6;
  ParticipationSchedule schedule;
  LossPolicy loss_policy = LossPolicy::Abort;
  StateOptions state;
  std::uint32_t max_steps = 100000;
};

// Steps until every packet is delivered. Throws ValidationError for a
// non-bijective perm before any slot runs.
RunStats route_randomized(std::span<const ProcessorId> perm, const NetworkConfig& cfg,
                          const RouterOptions& options, std::uint64_t seed);

// Continues an existing state to completion.
RunStats route_randomized(RoutingState& state, const RouterOptions& options,
                          std::uint64_t seed);

}  // namespace pops
