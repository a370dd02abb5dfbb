#include <gtest/gtest.h>

#include <map>

#include "support.hpp"

using namespace dflysim;
using dflysim::testing::desk_topology;
using dflysim::testing::one_way;

namespace {

EngineConfig engine(Algorithm a = Algorithm::min, std::uint64_t seed = 1) {
  EngineConfig e;
  e.routing = a;
  e.seed = seed;
  e.check_invariants = true;
  return e;
}

MotifProgram uniform_random(int ranks, std::uint64_t bytes, int count, std::uint64_t seed) {
  Rng rng(seed);
  return motif_ur(ranks, bytes, count, rng);
}

std::vector<int> iota_nodes(int n, int stride = 1) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i * stride;
  return v;
}

}  // namespace

TEST(Engine, EmptyWorkloadTerminatesImmediately) {
  Simulation sim(desk_topology(), engine());
  EXPECT_EQ(sim.run(), RunStatus::completed);
  EXPECT_TRUE(sim.packets().empty());
  EXPECT_EQ(sim.end_time(), 0);
}

TEST(Engine, SerializationArithmetic) {
  EXPECT_EQ(serialization_time(128, 200.0), from_ns(5.12));
  EXPECT_EQ(4 * serialization_time(128, 200.0), from_ns(20.48));
}

// One 4-flit packet, host -> R0 -> R1 -> host inside group 0.
// Head: 3 links x (5.12 serialization + 30 propagation) = 105.36 ns;
// the tail trails by 3 flit times: 120.72 ns.
TEST(Engine, SinglePacketOneLocalHopTimeline) {
  Simulation sim(desk_topology(), engine());
  sim.add_job(one_way(512), {0, 2});
  ASSERT_EQ(sim.run(), RunStatus::completed);
  ASSERT_EQ(sim.packets().size(), 1u);
  const Packet& p = sim.packets()[0];
  EXPECT_EQ(p.inject_time, 0);
  EXPECT_EQ(format_ns(p.latency()), "120.720");
  ASSERT_EQ(p.hops.size(), 1u);
  EXPECT_EQ(p.hops[0].time, from_ns(35.12));
  EXPECT_EQ(p.hops[0].vc, 0);
  EXPECT_EQ(sim.messages()[0].complete_time, from_ns(120.72));
}

// Every minimal router pair: latency = (hops + 2) link traversals + 3 flit times.
TEST(Engine, IdleLatencyMatchesPathSum) {
  const Topology t(desk_topology());
  for (int dst_router : {1, 5, 13, 22, 35}) {
    Simulation sim(desk_topology(), engine());
    sim.add_job(one_way(512), {0, dst_router * 2});
    ASSERT_EQ(sim.run(), RunStatus::completed);
    const Path path = t.minimal_route({0, 0}, t.router(dst_router));
    double expect = 2 * 35.12 + 3 * 5.12;
    for (const auto& h : path) expect += 5.12 + (h.kind == PortKind::global ? 300.0 : 30.0);
    const Packet& p = sim.packets()[0];
    EXPECT_EQ(p.latency(), from_ns(expect)) << "router " << dst_router;
    EXPECT_EQ(p.hops.size(), path.size());
  }
}

TEST(Engine, MessagesSplitIntoPacketsAndFlits) {
  Simulation sim(desk_topology(), engine());
  sim.add_job(one_way(1300), {0, 40});
  ASSERT_EQ(sim.run(), RunStatus::completed);
  ASSERT_EQ(sim.packets().size(), 3u);
  EXPECT_EQ(sim.packets()[0].size, 512u);
  EXPECT_EQ(sim.packets()[2].size, 276u);
  EXPECT_EQ(sim.packets()[2].flits, 3);
}

// Two hosts of router 0 send one packet each to router 1 at t=0. Both heads
// are ready at 35.12 ns; the loser waits for the winner's four flits.
TEST(Engine, ContentionStallIsExact) {
  Simulation sim(desk_topology(), engine());
  MotifProgram p;
  p.motif = "pair";
  p.ranks = 3;
  p.steps = {{Step::send(2, 512, 0)}, {Step::send(2, 512, 0)}, {Step::recv(0, 0), Step::recv(1, 0)}};
  sim.add_job(p, {0, 1, 2});
  ASSERT_EQ(sim.run(), RunStatus::completed);
  const Topology& t = sim.topology();
  const int port = t.port_number(PortKind::local, t.local_port_index(0, 1));
  EXPECT_EQ(sim.port_stats(0, port).stall, from_ns(20.48));
  EXPECT_EQ(sim.port_stats(0, port).packets, 2u);
  std::vector<Time> grants{sim.packets()[0].hops[0].time, sim.packets()[1].hops[0].time};
  std::sort(grants.begin(), grants.end());
  EXPECT_EQ(grants[0], from_ns(35.12));
  EXPECT_EQ(grants[1], from_ns(55.60));
}

TEST(Engine, RoundRobinAlternatesBetweenContendingInputs) {
  Simulation sim(desk_topology(), engine());
  MotifProgram p;
  p.motif = "pair";
  p.ranks = 3;
  p.steps = {{Step::send(2, 512 * 6, 0)}, {Step::send(2, 512 * 6, 0)}, {Step::recv(0, 0), Step::recv(1, 0)}};
  sim.add_job(p, {0, 1, 2});
  ASSERT_EQ(sim.run(), RunStatus::completed);
  std::vector<std::pair<Time, int>> order;
  for (const auto& pk : sim.packets()) order.emplace_back(pk.hops[0].time, pk.src_node);
  std::sort(order.begin(), order.end());
  for (std::size_t i = 1; i < order.size(); ++i) EXPECT_NE(order[i].second, order[i - 1].second) << i;
}

TEST(Engine, ConservationAndDrainUnderLoad) {
  for (Algorithm a : {Algorithm::min, Algorithm::ugalg, Algorithm::ugaln, Algorithm::par, Algorithm::qadaptive}) {
    Simulation sim(desk_topology(), engine(a, 3));
    sim.add_job(uniform_random(72, 4096, 20, 8), iota_nodes(72));
    ASSERT_EQ(sim.run(), RunStatus::completed) << to_string(a) << " " << sim.diagnosis();
    for (const auto& p : sim.packets()) {
      ASSERT_GE(p.deliver_time, p.inject_time);
      EXPECT_LE(static_cast<int>(p.hops.size()), hop_budget(a));
      EXPECT_TRUE(dflysim::testing::vcs_ascend_per_kind(p.hops)) << to_string(a);
    }
    for (int r = 0; r < sim.topology().num_routers(); ++r)
      for (int port = 0; port < sim.topology().ports_per_router(); ++port) {
        const PortStats& st = sim.port_stats(r, port);
        std::uint64_t sum = 0;
        for (auto b : st.bytes_by_job) sum += b;
        EXPECT_EQ(sum, st.bytes);
        const int vcs = sim.topology().channel(r, port).kind == PortKind::global ? 2 : 4;
        for (int vc = 0; vc < (sim.topology().channel(r, port).kind == PortKind::host ? 1 : vcs); ++vc)
          EXPECT_EQ(sim.credits(r, port, vc), 30);
      }
    for (const auto& m : sim.messages()) EXPECT_EQ(m.delivered, m.packets);
  }
}

TEST(Engine, SameSeedSameTrace) {
  auto trace = [](std::uint64_t seed) {
    Simulation sim(desk_topology(), engine(Algorithm::par, seed));
    sim.add_job(uniform_random(72, 2048, 10, 5), iota_nodes(72));
    sim.run();
    std::vector<std::tuple<Time, Time, std::size_t>> t;
    for (const auto& p : sim.packets()) t.emplace_back(p.inject_time, p.deliver_time, p.hops.size());
    return t;
  };
  EXPECT_EQ(trace(7), trace(7));
  EXPECT_NE(trace(7), trace(8));
}

TEST(Engine, UnmatchedReceiveIsReportedNotHung) {
  Simulation sim(desk_topology(), engine());
  MotifProgram p;
  p.motif = "broken";
  p.ranks = 2;
  p.steps = {{}, {Step::recv(0, 0)}};
  sim.add_job(p, {0, 1});
  EXPECT_EQ(sim.run(), RunStatus::deadlock);
  EXPECT_NE(sim.diagnosis().find("never finished"), std::string::npos);
}

TEST(Engine, RejectsBadJobs) {
  Simulation sim(desk_topology(), engine());
  EXPECT_THROW(sim.add_job(one_way(512), {0}), ConfigError);
  EXPECT_THROW(sim.add_job(one_way(512), {0, 72}), ConfigError);
  EXPECT_THROW(sim.add_job(one_way(0), {0, 1}), ConfigError);
  EngineConfig bad = engine();
  bad.local_vcs = 3;
  EXPECT_THROW(Simulation(desk_topology(), bad), ConfigError);
}

TEST(Engine, CommAndComputeAccounting) {
  Simulation sim(desk_topology(), engine());
  MotifProgram p;
  p.motif = "pp";
  p.ranks = 2;
  p.steps = {{Step::compute(from_ns(1000)), Step::send(1, 512, 0)}, {Step::recv(0, 0)}};
  sim.add_job(p, {0, 2});
  ASSERT_EQ(sim.run(), RunStatus::completed);
  EXPECT_EQ(sim.ranks()[0].compute_time, from_ns(1000));
  EXPECT_EQ(sim.ranks()[0].comm_time, from_ns(15.36));  // final wait covers injecting 3 more flits
  EXPECT_EQ(sim.ranks()[1].comm_time, from_ns(1120.72));
  EXPECT_EQ(sim.end_time(), from_ns(1120.72));
}

TEST(Engine, TimeLimitStopsEarly) {
  Simulation sim(desk_topology(), engine());
  sim.add_job(one_way(512, 100), {0, 70});
  EXPECT_EQ(sim.run(from_ns(500)), RunStatus::time_limit);
  EXPECT_EQ(sim.end_time(), from_ns(500));
}

TEST(Engine, QFeedbackMovesEstimates) {
  Simulation sim(desk_topology(), engine(Algorithm::qadaptive));
  sim.add_job(uniform_random(72, 4096, 10, 2), iota_nodes(72));
  ASSERT_EQ(sim.run(), RunStatus::completed);
  std::uint64_t total = 0;
  for (const auto& t : sim.qtables())
    for (int g = 0; g < 9; ++g)
      for (int s = 0; s < t.port_slots(); ++s) total += t.updates({QLevel::group, g}, s);
  EXPECT_GT(total, sim.packets().size());
  EXPECT_EQ(sim.qtables()[0].ignored_feedback(), 0u);
}
