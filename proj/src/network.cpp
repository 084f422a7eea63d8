#include "pops/network.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "pops/errors.hpp"

namespace pops {

namespace {

constexpr std::uint64_t kMaxProcessors = std::uint64_t{1} << 31;

}  // namespace

NetworkConfig::NetworkConfig(std::uint32_t d, std::uint32_t g) : d_(d), g_(g) {
  if (d == 0 || g == 0) {
    throw DomainError("POPS(d,g) needs d >= 1 and g >= 1");
  }
  if (std::uint64_t{d} * g > kMaxProcessors) {
    throw DomainError("POPS(d,g) with n = d*g above 2^31 is not supported");
  }
}

GroupId NetworkConfig::group_of(ProcessorId i) const {
  if (i >= n()) {
    throw DomainError("processor id " + std::to_string(i) + " outside [0, " +
                      std::to_string(n()) + ")");
  }
  return i / d_;
}

GroupId NetworkConfig::delta(ProcessorId x) const {
  if (x >= n()) {
    throw DomainError("processor id " + std::to_string(x) + " outside [0, " +
                      std::to_string(n()) + ")");
  }
  return x % g_;
}

std::uint32_t NetworkConfig::index_in_group(ProcessorId i) const {
  return i - group_of(i) * d_;
}

ProcessorId NetworkConfig::processor(GroupId group, std::uint32_t index) const {
  if (group >= g_ || index >= d_) {
    throw DomainError("no processor " + std::to_string(index) + " in group " +
                      std::to_string(group));
  }
  return group * d_ + index;
}

GroupId group_of(ProcessorId i, const NetworkConfig& cfg) { return cfg.group_of(i); }

GroupId delta(ProcessorId x, const NetworkConfig& cfg) { return cfg.delta(x); }

// ---------------------------------------------------------------------------

void SlotPlan::send(ProcessorId sender, const Message& message, GroupId dest_group) {
  sends_.push_back({sender, message, static_cast<std::uint32_t>(targets_.size()), 1});
  targets_.push_back(dest_group);
}

void SlotPlan::multicast(ProcessorId sender, const Message& message,
                         std::span<const GroupId> dest_groups) {
  sends_.push_back({sender, message, static_cast<std::uint32_t>(targets_.size()),
                    static_cast<std::uint32_t>(dest_groups.size())});
  targets_.insert(targets_.end(), dest_groups.begin(), dest_groups.end());
}

void SlotPlan::listen(ProcessorId listener, GroupId src_group) {
  listens_.push_back({listener, src_group});
}

void SlotPlan::clear() noexcept {
  sends_.clear();
  targets_.clear();
  listens_.clear();
}

// ---------------------------------------------------------------------------

SlotOutcome::SlotOutcome(const NetworkConfig& cfg)
    : g_(cfg.g()), couplers_(cfg.coupler_count()) {}

const SlotOutcome::CouplerState* SlotOutcome::live(CouplerId c) const {
  if (c.dest >= g_ || c.src >= g_) {
    throw DomainError("coupler id outside the g x g coupler space");
  }
  const CouplerState& s = couplers_[std::size_t{c.dest} * g_ + c.src];
  return (s.epoch == epoch_ && s.senders > 0) ? &s : nullptr;
}

CouplerStatus SlotOutcome::status(CouplerId c) const {
  const CouplerState* s = live(c);
  if (s == nullptr) return CouplerStatus::Idle;
  return s->senders == 1 ? CouplerStatus::Delivered : CouplerStatus::Conflict;
}

std::uint32_t SlotOutcome::sender_count(CouplerId c) const {
  const CouplerState* s = live(c);
  return s == nullptr ? 0 : s->senders;
}

std::optional<Message> SlotOutcome::delivered_message(CouplerId c) const {
  const CouplerState* s = live(c);
  if (s == nullptr || s->senders != 1) return std::nullopt;
  return messages_[s->transmission];
}

std::optional<Message> SlotOutcome::received_by(ProcessorId p) const {
  auto it = std::find_if(receptions_.begin(), receptions_.end(),
                         [p](const Reception& r) { return r.listener == p; });
  if (it == receptions_.end()) return std::nullopt;
  return it->message;
}

// ---------------------------------------------------------------------------

SlotEngine::SlotEngine(const NetworkConfig& cfg)
    : cfg_(cfg), outcome_(cfg), send_stamp_(cfg.n(), 0), listen_stamp_(cfg.n(), 0) {}

void SlotEngine::next_epoch() {
  if (outcome_.epoch_ == std::numeric_limits<std::uint32_t>::max()) {
    std::fill(send_stamp_.begin(), send_stamp_.end(), 0);
    std::fill(listen_stamp_.begin(), listen_stamp_.end(), 0);
    for (auto& c : outcome_.couplers_) c = {};
    outcome_.epoch_ = 0;
  }
  ++outcome_.epoch_;
}

const SlotOutcome& SlotEngine::execute(const SlotPlan& plan) {
  next_epoch();
  const std::uint32_t epoch = outcome_.epoch_;
  const std::uint32_t g = cfg_.g();
  const std::uint32_t n = cfg_.n();
  const std::uint32_t d = cfg_.d();

  outcome_.messages_.clear();
  outcome_.receptions_.clear();
  outcome_.conflicts_ = 0;
  outcome_.active_ = 0;

  const auto sends = plan.transmissions();
  for (std::uint32_t t = 0; t < sends.size(); ++t) {
    const auto& tx = sends[t];
    if (tx.sender >= n) throw ContractError("sender id out of range");
    if (send_stamp_[tx.sender] == epoch) {
      throw ContractError("processor " + std::to_string(tx.sender) +
                          " sends more than one message in a slot");
    }
    send_stamp_[tx.sender] = epoch;
    outcome_.messages_.push_back(tx.message);

    const GroupId src = tx.sender / d;
    for (GroupId dest : plan.targets(tx)) {
      if (dest >= g) throw ContractError("target group out of range");
      auto& c = outcome_.couplers_[std::size_t{dest} * g + src];
      if (c.epoch != epoch) {
        c = {epoch, 1, t};
        ++outcome_.active_;
      } else if (c.transmission != t) {
        // Counted per sending processor; a repeated target in one multicast
        // is the same sender.
        if (++c.senders == 2) ++outcome_.conflicts_;
        c.transmission = t;
      }
    }
  }

  for (const auto& l : plan.listens()) {
    if (l.listener >= n) throw ContractError("listener id out of range");
    if (l.src_group >= g) throw ContractError("listen group out of range");
    if (listen_stamp_[l.listener] == epoch) {
      throw ContractError("processor " + std::to_string(l.listener) +
                          " listens to more than one coupler in a slot");
    }
    listen_stamp_[l.listener] = epoch;
    const GroupId dest = l.listener / d;
    const auto& c = outcome_.couplers_[std::size_t{dest} * g + l.src_group];
    if (c.epoch == epoch && c.senders == 1) {
      outcome_.receptions_.push_back(
          {l.listener, CouplerId{dest, l.src_group}, outcome_.messages_[c.transmission]});
    }
  }
  return outcome_;
}

SlotOutcome execute_slot(const SlotPlan& plan, const NetworkConfig& cfg) {
  SlotEngine engine(cfg);
  return engine.execute(plan);
}

}  // namespace pops
