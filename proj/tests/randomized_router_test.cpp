#include "pops/randomized_router.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pops/errors.hpp"
#include "pops/permutation.hpp"
#include "pops/rng.hpp"

namespace pops {
namespace {

const Permutation kFig3{1, 5, 8, 9, 3, 10, 11, 14, 15, 13, 0, 7, 2, 6, 12, 4};

RouterOptions options(StepProtocol protocol, LossPolicy policy = LossPolicy::Abort) {
  RouterOptions o;
  o.protocol = protocol;
  o.loss_policy = policy;
  return o;
}

void expect_all_delivered(const RoutingState& state) {
  const auto perm = state.permutation();
  for (PacketId i = 0; i < perm.size(); ++i) {
    ASSERT_EQ(state.received_at(perm[i]), std::optional<PacketId>(i)) << "packet " << i;
    EXPECT_FALSE(state.has_original(i));
  }
}

TEST(Participation, Schedule) {
  const NetworkConfig sq(8, 8);
  const NetworkConfig wide(32, 8);  // d = 4g
  ParticipationSchedule sched;
  EXPECT_EQ(sched.phase1_steps(sq), 0u);
  EXPECT_EQ(sched.phase1_steps(wide), 12u);
  EXPECT_DOUBLE_EQ(participation_probability(1, wide, sched), 0.25);
  EXPECT_DOUBLE_EQ(participation_probability(5, wide, sched), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(participation_probability(13, wide, sched), 1.0);
  EXPECT_DOUBLE_EQ(participation_probability(100, wide, sched), 1.0);
  for (std::uint32_t s = 1; s < 20; ++s) EXPECT_DOUBLE_EQ(participation_probability(s, sq, sched), 1.0);
  for (std::uint32_t s = 1; s <= 12; ++s) {
    const double p = participation_probability(s, wide, sched);
    EXPECT_GT(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  EXPECT_THROW(participation_probability(0, wide, sched), DomainError);
}

TEST(RoutingState, RejectsBadInput) {
  EXPECT_THROW(RoutingState(NetworkConfig(2, 2), {0, 0, 1, 2}), ValidationError);
  EXPECT_THROW(RoutingState(NetworkConfig(2, 4), identity_permutation(8)), DomainError);
  EXPECT_THROW(route_randomized(Permutation{1, 2, 3, 3}, NetworkConfig(2, 2), {}, 1),
               ValidationError);
  RoutingState st(NetworkConfig(2, 2), identity_permutation(4));
  StepControl c;
  c.participation = 0.0;
  EXPECT_THROW(run_step(st, c), DomainError);
  c.participation = 1.5;
  EXPECT_THROW(run_step(st, c), DomainError);
  EXPECT_EQ(st.steps_done(), 0u);
}

// A lone packet p5 on POPS(3,3) with pi(5) = 1 and intermediate group 2.
TEST(RandomizedStep, SinglePacketWalkthrough) {
  const NetworkConfig cfg(3, 3);
  Permutation perm = identity_permutation(9);
  std::swap(perm[1], perm[5]);
  std::uint64_t seed = 0;
  while (derive_uniform_group({seed, 5, 1, Purpose::Color}, 3) != 2) ++seed;

  const std::vector<PacketId> pending{5};
  RoutingState st(cfg, perm, pending, {.immediate_exit = false, .record_trace = true});
  StepControl c;
  c.protocol = StepProtocol::Paper5;
  c.seed = seed;
  const StepMetrics m = run_step(st, c);
  EXPECT_EQ(m.deliveries, 1u);
  EXPECT_TRUE(st.done());
  EXPECT_EQ(st.received_at(1), std::optional<PacketId>(5));

  const std::vector<std::pair<std::uint8_t, CouplerId>> want{
      {1, {2, 1}}, {2, {1, 2}}, {3, {2, 1}}, {4, {1, 2}}, {5, {0, 1}}};
  ASSERT_EQ(st.trace().size(), want.size());
  for (std::size_t k = 0; k < want.size(); ++k) {
    const TraceEvent& e = st.trace()[k];
    EXPECT_EQ(e.slot, want[k].first);
    EXPECT_EQ(e.coupler, want[k].second) << "slot " << int(e.slot);
    EXPECT_EQ(e.status, CouplerStatus::Delivered);
    EXPECT_EQ(e.message.packet, 5u);
  }
  EXPECT_EQ(st.trace()[0].sender, 5u);
  EXPECT_EQ(st.trace()[1].sender, 2u * 3 + 1);  // relay r*d + source group
  EXPECT_EQ(st.trace()[4].message.kind, MessageKind::Copy);
  EXPECT_EQ(st.trace()[2].message.kind, MessageKind::Ack);
}

TEST(RandomizedStep, SameColourInOneGroupBlocksBoth) {
  const NetworkConfig cfg(4, 4);
  std::uint64_t seed = 0;
  while (derive_uniform_group({seed, 0, 1, Purpose::Color}, 4) !=
         derive_uniform_group({seed, 1, 1, Purpose::Color}, 4)) {
    ++seed;
  }
  const std::vector<PacketId> pending{0, 1};
  RoutingState st(cfg, kFig3, pending);
  StepControl c;
  c.seed = seed;
  const StepMetrics m = run_step(st, c);
  EXPECT_EQ(m.participants, 2u);
  EXPECT_EQ(m.slot1_survivors, 0u);
  EXPECT_EQ(m.deliveries, 0u);
  EXPECT_EQ(m.conflicts[0], 1u);
  EXPECT_EQ(st.pending_count(), 2u);
  EXPECT_TRUE(st.has_original(0));
  EXPECT_TRUE(st.has_original(1));
}

TEST(RandomizedStep, LonePacketAlwaysArrives) {
  const NetworkConfig cfg(8, 8);
  const auto perm = uniform_permutation(cfg.n(), 11);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (auto protocol : {StepProtocol::Paper5, StepProtocol::Reversal6}) {
      const std::vector<PacketId> pending{static_cast<PacketId>(seed % cfg.n())};
      RoutingState st(cfg, perm, pending);
      StepControl c;
      c.protocol = protocol;
      c.seed = seed;
      EXPECT_EQ(run_step(st, c).deliveries, 1u);
      EXPECT_TRUE(st.done());
    }
  }
}

TEST(RandomizedRouter, Fig3PermutationConflictFreeTail) {
  const NetworkConfig cfg(4, 4);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RoutingState st(cfg, kFig3);
    const RunStats stats = route_randomized(st, options(StepProtocol::Paper5), seed);
    expect_all_delivered(st);
    EXPECT_EQ(stats.slots, 5ull * stats.iterations);
    for (const auto& m : stats.per_step) {
      ASSERT_EQ(m.conflicts.size(), 5u);
      EXPECT_EQ(m.conflicts[2] + m.conflicts[3] + m.conflicts[4], 0u) << "seed " << seed;
      EXPECT_LE(m.deliveries, m.slot1_survivors);
      EXPECT_LE(m.slot1_survivors, m.participants);
    }
  }
}

TEST(RandomizedRouter, IdentityStillTravels) {
  const NetworkConfig cfg(4, 4);
  RoutingState st(cfg, identity_permutation(16), {.immediate_exit = false, .record_trace = true});
  route_randomized(st, options(StepProtocol::Paper5), 3);
  expect_all_delivered(st);
  std::vector<int> hops(16, 0);
  for (const auto& e : st.trace()) {
    if (e.status == CouplerStatus::Delivered && e.message.kind == MessageKind::Copy) {
      ++hops[e.message.packet];
    }
  }
  for (int h : hops) EXPECT_GE(h, 3);
}

// For d = g the literal step never conflicts after slot 2, and an original is
// deleted exactly when its copy is delivered in the same step.
TEST(RandomizedRouter, FiveSlotStepIsLosslessWhenSquare) {
  for (std::uint32_t g : {2u, 4u, 8u, 16u}) {
    const NetworkConfig cfg(g, g);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto perm = uniform_permutation(cfg.n(), derive_run_seed(seed, g));
      RoutingState st(cfg, perm);
      const RunStats stats = route_randomized(st, options(StepProtocol::Paper5), seed);
      expect_all_delivered(st);
      EXPECT_EQ(stats.conflicts_ack + stats.conflicts_delivery, 0u);
      for (const auto& m : stats.per_step) {
        EXPECT_EQ(m.losses, 0u);
        EXPECT_EQ(m.unacked_deliveries, 0u);
        EXPECT_EQ(m.duplicates, 0u);
      }
    }
  }
}

TEST(RandomizedRouter, ReversalDeliversExactlyOnceForWideGroups) {
  for (auto [d, g] : {std::pair{8u, 2u}, {16u, 4u}, {12u, 4u}, {64u, 16u}}) {
    const NetworkConfig cfg(d, g);
    for (PermSource src : {PermSource::Uniform, PermSource::Stress}) {
      for (std::uint64_t seed = 0; seed < 30; ++seed) {
        RoutingState st(cfg, generate_permutation(src, cfg, seed));
        const RunStats stats = route_randomized(st, options(StepProtocol::Reversal6), seed);
        expect_all_delivered(st);
        EXPECT_EQ(stats.duplicates, 0u);
        EXPECT_EQ(stats.losses, 0u);
        EXPECT_EQ(stats.conflicts_ack, 0u);
        EXPECT_EQ(stats.slots, 6ull * stats.iterations);
      }
    }
  }
}

TEST(RandomizedRouter, FiveSlotStepLosesPacketsForWideGroups) {
  const NetworkConfig cfg(16, 4);
  const auto perm = stress_permutation(cfg);
  int aborted = 0;
  std::uint64_t repaired = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    try {
      route_randomized(perm, cfg, options(StepProtocol::Paper5), seed);
    } catch (const LossDetected&) {
      ++aborted;
    }
    RoutingState st(cfg, perm);
    repaired += route_randomized(st, options(StepProtocol::Paper5, LossPolicy::Repair), seed).losses;
    expect_all_delivered(st);
  }
  EXPECT_GT(aborted, 0);
  EXPECT_GT(repaired, 0u);
}

TEST(RandomizedRouter, BufferBound) {
  for (auto [d, g] : {std::pair{8u, 8u}, {16u, 4u}}) {
    const NetworkConfig cfg(d, g);
    for (bool immediate : {false, true}) {
      for (auto protocol : {StepProtocol::Paper5, StepProtocol::Reversal6}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
          RouterOptions o = options(protocol, LossPolicy::Repair);
          o.state.immediate_exit = immediate;
          const auto stats = route_randomized(uniform_permutation(cfg.n(), seed), cfg, o, seed);
          EXPECT_LE(stats.max_buffer_occupancy, immediate ? 2u : 3u);
        }
      }
    }
  }
}

TEST(RandomizedRouter, AdaptiveScheduleCompletes) {
  const NetworkConfig cfg(32, 8);
  RouterOptions o = options(StepProtocol::Reversal6);
  o.schedule.mode = ScheduleMode::Adaptive;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RoutingState st(cfg, uniform_permutation(cfg.n(), seed));
    const auto stats = route_randomized(st, o, seed);
    expect_all_delivered(st);
    EXPECT_LE(stats.per_step.front().participation, 1.0);
  }
}

TEST(RandomizedRouter, ManySeedsTerminateForWideGroups) {
  const NetworkConfig cfg(16, 4);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    RouterOptions o = options(StepProtocol::Reversal6);
    o.max_steps = 1000;
    const auto stats = route_randomized(uniform_permutation(cfg.n(), seed), cfg, o, seed);
    EXPECT_LT(stats.iterations, 1000u);
  }
}

TEST(RandomizedRouter, TraceIsDeterministic) {
  const NetworkConfig cfg(8, 4);
  const auto perm = uniform_permutation(cfg.n(), 5);
  auto trace_of = [&](std::uint64_t seed) {
    RoutingState st(cfg, perm, {.immediate_exit = false, .record_trace = true});
    route_randomized(st, options(StepProtocol::Reversal6), seed);
    std::vector<std::tuple<std::uint32_t, int, ProcessorId, GroupId, GroupId, PacketId, int>> out;
    for (const auto& e : st.trace()) {
      out.emplace_back(e.step, e.slot, e.sender, e.coupler.dest, e.coupler.src, e.message.packet,
                       static_cast<int>(e.status));
    }
    return out;
  };
  EXPECT_EQ(trace_of(9), trace_of(9));
  EXPECT_NE(trace_of(9), trace_of(10));
}

// With everyone sending at once on a square network, a packet survives slot 1
// with probability about 1/e and slot 2 with about exp(-1/e) more.
TEST(RandomizedRouter, SaturatedFirstStepThroughput) {
  const NetworkConfig cfg(512, 512);
  double total = 0;
  constexpr int kSeeds = 3;
  for (int s = 0; s < kSeeds; ++s) {
    RoutingState st(cfg, uniform_permutation(cfg.n(), derive_run_seed(77, s)));
    StepControl c;
    c.protocol = StepProtocol::Paper5;
    c.seed = derive_run_seed(78, s);
    total += static_cast<double>(run_step(st, c).deliveries) / cfg.n();
  }
  EXPECT_NEAR(total / kSeeds, std::exp(-(1 + std::exp(-1.0))), 0.01);
}

// Pending sets whose conflict graph has degree at most sqrt(g) lose at most a
// 2/sqrt(g) fraction per step on average and drain within a few steps.
TEST(RandomizedRouter, SparseRegimeDrainsQuickly) {
  const NetworkConfig cfg(64, 64);
  const std::uint32_t cap = 8;
  double failed = 0, attempted = 0;
  std::uint32_t worst_steps = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto perm = uniform_permutation(cfg.n(), seed);
    std::vector<std::uint32_t> left(64, 0), right(64, 0);
    std::vector<PacketId> pending;
    for (PacketId i = 0; i < cfg.n(); ++i) {
      const GroupId a = i / 64, b = perm[i] % 64;
      if (left[a] < cap && right[b] < cap) {
        ++left[a];
        ++right[b];
        pending.push_back(i);
      }
    }
    RoutingState st(cfg, perm, pending);
    StepControl c;
    c.protocol = StepProtocol::Paper5;
    c.seed = seed;
    const auto m = run_step(st, c);
    attempted += m.pending;
    failed += m.pending - m.deliveries;
    RouterOptions o = options(StepProtocol::Paper5);
    const auto rest = route_randomized(st, o, seed + 1000);
    worst_steps = std::max(worst_steps, rest.iterations + 1);
  }
  EXPECT_LE(failed / attempted, 2.0 / std::sqrt(64.0));
  EXPECT_LE(worst_steps, 5u);
}

}  // namespace
}  // namespace pops
