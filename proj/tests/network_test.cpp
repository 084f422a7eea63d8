#include "pops/network.hpp"

#include <gtest/gtest.h>

#include <array>
#include <random>

#include "pops/errors.hpp"

namespace pops {
namespace {

Message copy_of(PacketId id) { return Message{MessageKind::Copy, id, {}}; }

TEST(NetworkConfig, Arithmetic) {
  const NetworkConfig cfg(3, 3);
  EXPECT_EQ(cfg.n(), 9u);
  EXPECT_EQ(cfg.coupler_count(), 9u);
  EXPECT_EQ(group_of(5, cfg), 1u);
  EXPECT_EQ(group_of(0, cfg), 0u);
  EXPECT_EQ(delta(1, cfg), 1u);
  EXPECT_EQ(delta(0, cfg), 0u);

  const NetworkConfig sq(4, 4);
  EXPECT_EQ(group_of(15, sq), 3u);
  EXPECT_EQ(delta(8, sq), 0u);
  EXPECT_EQ(sq.processor(2, 3), 11u);
  EXPECT_EQ(sq.index_in_group(11), 3u);
}

TEST(NetworkConfig, RejectsBadShapesAndIds) {
  EXPECT_THROW(NetworkConfig(0, 4), DomainError);
  EXPECT_THROW(NetworkConfig(4, 0), DomainError);
  EXPECT_THROW(NetworkConfig(1u << 16, 1u << 16), DomainError);
  const NetworkConfig cfg(2, 3);
  EXPECT_THROW(group_of(6, cfg), DomainError);
  EXPECT_THROW(delta(6, cfg), DomainError);
  EXPECT_THROW(cfg.processor(3, 0), DomainError);
  EXPECT_THROW(cfg.processor(0, 2), DomainError);
}

TEST(SlotEngine, SingleSenderDelivers) {
  const NetworkConfig cfg(3, 3);
  SlotPlan plan;
  plan.send(4, copy_of(7), 2);  // group 1 -> c(2,1)
  plan.listen(6, 1);
  plan.listen(7, 1);
  plan.listen(8, 0);
  const SlotOutcome out = execute_slot(plan, cfg);
  EXPECT_EQ(out.status({2, 1}), CouplerStatus::Delivered);
  EXPECT_EQ(out.sender_count({2, 1}), 1u);
  ASSERT_TRUE(out.received_by(6).has_value());
  EXPECT_EQ(out.received_by(6)->packet, 7u);
  ASSERT_TRUE(out.received_by(7).has_value());
  EXPECT_FALSE(out.received_by(8).has_value());
  EXPECT_EQ(out.status({0, 1}), CouplerStatus::Idle);
  EXPECT_EQ(out.conflict_count(), 0u);
  EXPECT_EQ(out.active_coupler_count(), 1u);
}

TEST(SlotEngine, TwoSendersConflict) {
  const NetworkConfig cfg(3, 3);
  SlotPlan plan;
  plan.send(3, copy_of(1), 2);
  plan.send(5, copy_of(2), 2);
  plan.listen(6, 1);
  const SlotOutcome out = execute_slot(plan, cfg);
  EXPECT_EQ(out.status({2, 1}), CouplerStatus::Conflict);
  EXPECT_EQ(out.sender_count({2, 1}), 2u);
  EXPECT_FALSE(out.delivered_message({2, 1}).has_value());
  EXPECT_FALSE(out.received_by(6).has_value());
  EXPECT_TRUE(out.receptions().empty());
  EXPECT_EQ(out.conflict_count(), 1u);
}

TEST(SlotEngine, OneToAllMulticast) {
  const NetworkConfig cfg(4, 4);
  SlotPlan plan;
  const std::array<GroupId, 4> all{0, 1, 2, 3};
  plan.multicast(5, copy_of(9), all);
  for (GroupId b = 0; b < 4; ++b) plan.listen(cfg.processor(b, 0), 1);
  const SlotOutcome out = execute_slot(plan, cfg);
  for (GroupId b = 0; b < 4; ++b) {
    ASSERT_TRUE(out.received_by(cfg.processor(b, 0)).has_value()) << b;
    EXPECT_EQ(out.received_by(cfg.processor(b, 0))->packet, 9u);
  }
  EXPECT_EQ(out.conflict_count(), 0u);
}

TEST(SlotEngine, ContractViolations) {
  const NetworkConfig cfg(2, 2);
  {
    SlotPlan plan;
    plan.send(0, copy_of(0), 1);
    plan.send(0, copy_of(1), 0);
    EXPECT_THROW(execute_slot(plan, cfg), ContractError);
  }
  {
    SlotPlan plan;
    plan.listen(1, 0);
    plan.listen(1, 1);
    EXPECT_THROW(execute_slot(plan, cfg), ContractError);
  }
  {
    SlotPlan plan;
    plan.send(4, copy_of(0), 0);
    EXPECT_THROW(execute_slot(plan, cfg), ContractError);
  }
  {
    SlotPlan plan;
    plan.send(0, copy_of(0), 2);
    EXPECT_THROW(execute_slot(plan, cfg), ContractError);
  }
}

TEST(SlotEngine, SendAndListenInSameSlot) {
  const NetworkConfig cfg(2, 2);
  SlotPlan plan;
  plan.send(0, copy_of(3), 1);
  plan.send(2, copy_of(4), 0);
  plan.listen(0, 1);
  plan.listen(2, 0);
  const SlotOutcome out = execute_slot(plan, cfg);
  EXPECT_EQ(out.received_by(0)->packet, 4u);
  EXPECT_EQ(out.received_by(2)->packet, 3u);
}

// Oracle: count senders per coupler directly and compare with the engine,
// also checking that the outcome does not depend on plan order.
TEST(SlotEngine, RandomPlansMatchDirectCount) {
  const NetworkConfig cfg(4, 5);
  std::mt19937 rng(7);
  SlotEngine engine(cfg);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::pair<ProcessorId, GroupId>> sends;
    std::vector<std::pair<ProcessorId, GroupId>> listens;
    for (ProcessorId p = 0; p < cfg.n(); ++p) {
      if (rng() % 3 == 0) sends.emplace_back(p, rng() % cfg.g());
      if (rng() % 2 == 0) listens.emplace_back(p, rng() % cfg.g());
    }
    std::vector<int> count(cfg.g() * cfg.g(), 0);
    std::vector<ProcessorId> who(cfg.g() * cfg.g(), 0);
    for (auto [p, b] : sends) {
      const std::size_t c = b * cfg.g() + p / cfg.d();
      ++count[c];
      who[c] = p;
    }

    SlotPlan forward, backward;
    for (auto [p, b] : sends) forward.send(p, copy_of(p), b);
    for (auto [p, a] : listens) forward.listen(p, a);
    for (auto it = sends.rbegin(); it != sends.rend(); ++it) backward.send(it->first, copy_of(it->first), it->second);
    for (auto it = listens.rbegin(); it != listens.rend(); ++it) backward.listen(it->first, it->second);

    const SlotOutcome a = engine.execute(forward);
    const SlotOutcome b = execute_slot(backward, cfg);
    std::uint32_t conflicts = 0;
    for (GroupId dst = 0; dst < cfg.g(); ++dst) {
      for (GroupId src = 0; src < cfg.g(); ++src) {
        const int k = count[dst * cfg.g() + src];
        const CouplerStatus want = k == 0   ? CouplerStatus::Idle
                                   : k == 1 ? CouplerStatus::Delivered
                                            : CouplerStatus::Conflict;
        EXPECT_EQ(a.status({dst, src}), want);
        EXPECT_EQ(b.status({dst, src}), want);
        if (k >= 2) ++conflicts;
      }
    }
    EXPECT_EQ(a.conflict_count(), conflicts);
    for (auto [p, src] : listens) {
      const std::size_t c = (p / cfg.d()) * cfg.g() + src;
      const auto got = a.received_by(p);
      EXPECT_EQ(b.received_by(p), got);
      if (count[c] == 1) {
        ASSERT_TRUE(got.has_value());
        EXPECT_EQ(got->packet, who[c]);
      } else {
        EXPECT_FALSE(got.has_value());
      }
    }
  }
}

}  // namespace
}  // namespace pops
