#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace dflysim;
using dflysim::testing::desk_topology;

namespace {

Feedback fb(double link, double queue, double best) {
  Feedback f;
  f.link_latency_ns = link;
  f.queue_delay_ns = queue;
  f.best_estimate_ns = best;
  return f;
}

}  // namespace

TEST(QTable, HandComputedUpdate) {
  QTable t(9, 4, 5, 100.0);
  const QKey k{QLevel::group, 3};
  ASSERT_TRUE(t.update(k, 2, fb(30, 0, 200), 0.1));
  EXPECT_NEAR(t.estimate(k, 2), 113.0, 1e-12);
  EXPECT_EQ(t.updates(k, 2), 1u);
  EXPECT_DOUBLE_EQ(t.estimate(k, 1), 100.0);
}

TEST(QTable, FullOverwriteWithAlphaOne) {
  QTable t(9, 4, 5, 100.0);
  const QKey k{QLevel::router, 1};
  t.update(k, 0, fb(300, 12.5, 40), 1.0);
  EXPECT_DOUBLE_EQ(t.estimate(k, 0), 352.5);
}

TEST(QTable, GeometricDecayTowardConstantTarget) {
  for (double alpha : {0.05, 0.1, 0.3, 0.9}) {
    QTable t(4, 2, 3, 2000.0);
    const QKey k{QLevel::group, 2};
    const double target = 330.0, q0 = 2000.0;
    for (int n = 1; n <= 400; ++n) {
      t.update(k, 1, fb(target, 0, 0), alpha);
      const double expect = std::pow(1.0 - alpha, n) * std::abs(q0 - target);
      ASSERT_NEAR(std::abs(t.estimate(k, 1) - target), expect, 1e-9) << "alpha " << alpha << " n " << n;
    }
  }
}

TEST(QTable, UnknownEntriesAreCountedAndDropped) {
  QTable t(4, 2, 3, 10.0);
  EXPECT_FALSE(t.update({QLevel::group, 7}, 0, fb(1, 1, 1), 0.5));
  EXPECT_FALSE(t.update({QLevel::group, 1}, 3, fb(1, 1, 1), 0.5));
  EXPECT_EQ(t.ignored_feedback(), 2u);
}

TEST(QTable, DefaultInitialEstimates) {
  const auto cfg = desk_topology();
  EXPECT_NEAR(idle_minimal_latency_ns(cfg), 2 * 35.12 + 305.12, 1e-9);
  EXPECT_NEAR(saturated_minimal_latency_ns(cfg), 375.36 + 3 * 30 * 20.48, 1e-9);
}

class QRouteTest : public ::testing::Test {
 protected:
  Topology topo{desk_topology()};
  Rng rng{1};
  std::function<int(const PortId&)> idle = [](const PortId&) { return 0; };
  QTable table{9, 4, topo.ports_per_router() - topo.hosts_per_router(), 500.0};

  Packet packet(RouterId src, RouterId dst) {
    Packet p;
    p.src_node = topo.flat(src) * 2;
    p.dst_node = topo.flat(dst) * 2;
    return p;
  }
};

TEST_F(QRouteTest, TiesPickMinimalLowestPort) {
  QHyperparams hp;
  hp.epsilon = 0.0;
  const RouterId src{0, 0}, dst{5, 1};
  Packet p = packet(src, dst);
  std::size_t rr = 0;
  RouteContext ctx{topo, src, rng, idle, &rr, 0};
  const auto r = q_route(p, ctx, table, hp);
  EXPECT_EQ(r.port, topo.ports_toward_group(src, 5).front());
  EXPECT_FALSE(p.nonminimal);
  EXPECT_DOUBLE_EQ(r.best_estimate_ns, 500.0);
}

TEST_F(QRouteTest, StrictlyLowestEstimateAlwaysWins) {
  QHyperparams hp;
  hp.epsilon = 0.0;
  const RouterId src{0, 0}, dst{5, 1};
  const PortId g1{src, PortKind::global, 1};
  table.set({QLevel::group, 5}, q_slot(topo, g1), 90.0);
  for (int i = 0; i < 50; ++i) {
    Packet p = packet(src, dst);
    std::size_t rr = 0;
    RouteContext ctx{topo, src, rng, idle, &rr, 0};
    const auto r = q_route(p, ctx, table, hp);
    EXPECT_EQ(r.port, g1);
    EXPECT_DOUBLE_EQ(r.best_estimate_ns, 90.0);
  }
}

TEST_F(QRouteTest, DestinationRouterReportsZero) {
  const RouterId dst{2, 3};
  Packet p = packet({0, 0}, dst);
  p.phase = RoutingPhase::InDestGroup;
  std::size_t rr = 0;
  RouteContext ctx{topo, dst, rng, idle, &rr, 0};
  const auto r = q_route(p, ctx, table, {});
  EXPECT_EQ(r.port.kind, PortKind::host);
  EXPECT_EQ(r.best_estimate_ns, 0.0);
}

TEST_F(QRouteTest, ExplorationRateMatchesEpsilon) {
  QHyperparams hp;
  hp.epsilon = 0.1;
  int explored = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    Packet p = packet({0, 0}, {5, 1});
    std::size_t rr = 0;
    RouteContext ctx{topo, {0, 0}, rng, idle, &rr, 0};
    explored += q_route(p, ctx, table, hp).explored;
  }
  EXPECT_NEAR(explored / static_cast<double>(n), 0.1, 0.01);
}

// 4 groups, one persistent flow across groups on an otherwise idle network.
TEST(QConvergence, SingleFlowSettlesOnMinimalPortAtItsFixedPoint) {
  TopologyConfig cfg;
  cfg.groups = 4;
  cfg.routers_per_group = 2;
  cfg.hosts_per_router = 1;
  cfg.global_links_per_router = 2;
  EngineConfig ec;
  ec.routing = Algorithm::qadaptive;
  ec.seed = 4;
  Simulation sim(cfg, ec);
  const Topology& t = sim.topology();
  const RouterId src{0, 0}, dst{2, 0};
  sim.add_job(dflysim::testing::one_way(512, 450), {t.flat(src), t.flat(dst)});
  ASSERT_EQ(sim.run(), RunStatus::completed);

  const QTable& table = sim.qtables()[static_cast<std::size_t>(t.flat(src))];
  const QKey key{QLevel::group, 2};
  std::uint64_t updates = 0;
  int best_slot = 0;
  for (int s = 0; s < table.port_slots(); ++s) {
    updates += table.updates(key, s);
    if (table.estimate(key, s) < table.estimate(key, best_slot)) best_slot = s;
  }
  EXPECT_LE(updates, 500u);
  const Path minimal = t.minimal_route(src, dst);
  EXPECT_EQ(best_slot, q_slot(t, minimal.front()));

  // Fixed point of the update rule with no queueing: each hop adds its
  // propagation plus one flit time, down to the destination group.
  double fixed = 0;
  RouterId cur = src;
  for (const auto& hop : minimal) {
    if (cur.group == dst.group) break;
    fixed += to_ns(t.channel(t.flat(cur), t.port_number(hop)).latency) + 5.12;
    cur = t.neighbor(hop);
  }
  EXPECT_NEAR(table.estimate(key, best_slot), fixed, 1.0);
}
