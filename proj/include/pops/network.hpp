#pragma once

// POPS(d,g) topology and the slot-synchronous message engine.
//
// n = d*g processors are split into g groups of d consecutive processors.
// Coupler c(b,a) takes the processors of group a as senders and broadcasts to
// the processors of group b. In one slot a processor sends at most one
// message (to any subset of the couplers of its own group) and listens to at
// most one coupler feeding its group. A coupler driven by two or more senders
// delivers nothing.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pops {

using ProcessorId = std::uint32_t;
using GroupId = std::uint32_t;
using PacketId = std::uint32_t;

class NetworkConfig {
 public:
  NetworkConfig(std::uint32_t d, std::uint32_t g);

  std::uint32_t d() const noexcept { return d_; }
  std::uint32_t g() const noexcept { return g_; }
  std::uint32_t n() const noexcept { return d_ * g_; }
  std::uint64_t coupler_count() const noexcept { return std::uint64_t{g_} * g_; }

  // floor(i / d); throws DomainError unless i < n.
  GroupId group_of(ProcessorId i) const;
  // x mod g, the temporary destination group of a packet headed to x.
  GroupId delta(ProcessorId x) const;
  // Position of i inside its group, in [0, d).
  std::uint32_t index_in_group(ProcessorId i) const;
  ProcessorId processor(GroupId group, std::uint32_t index) const;

  bool operator==(const NetworkConfig&) const = default;

 private:
  std::uint32_t d_;
  std::uint32_t g_;
};

GroupId group_of(ProcessorId i, const NetworkConfig& cfg);
GroupId delta(ProcessorId x, const NetworkConfig& cfg);

// c(dest, src): senders are the processors of `src`, listeners those of `dest`.
struct CouplerId {
  GroupId dest = 0;
  GroupId src = 0;

  bool operator==(const CouplerId&) const = default;
};

enum class MessageKind : std::uint8_t { Copy, Ack, Nack };

struct MessageHeader {
  ProcessorId source = 0;
  ProcessorId dest = 0;
  GroupId intermediate = 0;
  GroupId temp_dest = 0;

  bool operator==(const MessageHeader&) const = default;
};

// Acks carry the header only; copies stand for the full packet.
struct Message {
  MessageKind kind = MessageKind::Copy;
  PacketId packet = 0;
  MessageHeader header;

  bool operator==(const Message&) const = default;
};

class SlotPlan {
 public:
  struct Transmission {
    ProcessorId sender;
    Message message;
    std::uint32_t first_target;
    std::uint32_t target_count;
  };
  struct Listen {
    ProcessorId listener;
    GroupId src_group;
  };

  // Send `message` on c(dest_group, group(sender)).
  void send(ProcessorId sender, const Message& message, GroupId dest_group);
  // Send the same message on c(b, group(sender)) for every b in dest_groups.
  void multicast(ProcessorId sender, const Message& message,
                 std::span<const GroupId> dest_groups);
  // Listen on c(group(listener), src_group).
  void listen(ProcessorId listener, GroupId src_group);

  void clear() noexcept;
  bool empty() const noexcept { return sends_.empty() && listens_.empty(); }

  std::span<const Transmission> transmissions() const noexcept { return sends_; }
  std::span<const Listen> listens() const noexcept { return listens_; }
  std::span<const GroupId> targets(const Transmission& t) const noexcept {
    return std::span<const GroupId>(targets_).subspan(t.first_target, t.target_count);
  }

 private:
  std::vector<Transmission> sends_;
  std::vector<GroupId> targets_;
  std::vector<Listen> listens_;
};

enum class CouplerStatus : std::uint8_t { Idle, Delivered, Conflict };

struct Reception {
  ProcessorId listener;
  CouplerId coupler;
  Message message;
};

// Result of one slot. Conflict metadata is exposed for verification and
// reporting; routing logic only ever consumes receptions().
class SlotOutcome {
 public:
  explicit SlotOutcome(const NetworkConfig& cfg);

  CouplerStatus status(CouplerId c) const;
  std::uint32_t sender_count(CouplerId c) const;
  // Message carried by a Delivered coupler, nullopt otherwise.
  std::optional<Message> delivered_message(CouplerId c) const;

  // Successful receptions in the order listeners appear in the plan.
  std::span<const Reception> receptions() const noexcept { return receptions_; }
  std::optional<Message> received_by(ProcessorId p) const;

  // Couplers with at least two senders.
  std::uint32_t conflict_count() const noexcept { return conflicts_; }
  // Couplers with at least one sender.
  std::uint32_t active_coupler_count() const noexcept { return active_; }

 private:
  friend class SlotEngine;

  struct CouplerState {
    std::uint32_t epoch = 0;
    std::uint32_t senders = 0;
    std::uint32_t transmission = 0;
  };

  const CouplerState* live(CouplerId c) const;

  std::uint32_t g_;
  std::uint32_t epoch_ = 0;
  std::vector<CouplerState> couplers_;
  std::vector<Message> messages_;
  std::vector<Reception> receptions_;
  std::uint32_t conflicts_ = 0;
  std::uint32_t active_ = 0;
};

// Reusable slot evaluator. Scratch state is stamped with a per-slot epoch so
// that a slot costs time proportional to the plan, not to n or g^2.
class SlotEngine {
 public:
  explicit SlotEngine(const NetworkConfig& cfg);

  // Throws ContractError if a processor sends twice or listens twice, or if
  // any id is out of range. The returned reference is valid until the next
  // call.
  const SlotOutcome& execute(const SlotPlan& plan);

  const NetworkConfig& config() const noexcept { return cfg_; }

 private:
  void next_epoch();

  NetworkConfig cfg_;
  SlotOutcome outcome_;
  std::vector<std::uint32_t> send_stamp_;
  std::vector<std::uint32_t> listen_stamp_;
};

SlotOutcome execute_slot(const SlotPlan& plan, const NetworkConfig& cfg);

}  // namespace pops
