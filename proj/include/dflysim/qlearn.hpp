#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "dflysim/common.hpp"
#include "dflysim/packet.hpp"
#include "dflysim/routing.hpp"
#include "dflysim/topology.hpp"

namespace dflysim {

struct QHyperparams {
  double alpha = 0.1;
  double epsilon = 0.002;
  double init_ns = -1.0;  // < 0: saturated minimal-path latency derived from the topology
};

// Idle latency of a worst-case minimal router path (local, global, local),
// the default initial estimate of every table entry.
inline double idle_minimal_latency_ns(const TopologyConfig& cfg, std::uint32_t flit_bytes = 128) {
  auto hop = [&](const LinkParams& l) { return l.latency_ns + to_ns(serialization_time(flit_bytes, l.gbps)); };
  return 2.0 * hop(cfg.local_link) + hop(cfg.global_link);
}

// Latency of the same path when every hop first drains a full VC buffer
// (buffer_packets packets) ahead of the packet. Used as the default initial
// estimate: an untried port is assumed congested until feedback says
// otherwise, which keeps cold tables from herding traffic onto detours.
inline double saturated_minimal_latency_ns(const TopologyConfig& cfg, std::uint32_t flit_bytes = 128,
                                           std::uint32_t packet_bytes = 512, int buffer_packets = 30) {
  auto drain = [&](const LinkParams& l) { return buffer_packets * to_ns(serialization_time(packet_bytes, l.gbps)); };
  return idle_minimal_latency_ns(cfg, flit_bytes) + 2.0 * drain(cfg.local_link) + drain(cfg.global_link);
}

enum class QLevel : std::uint8_t { group = 1, router = 2 };

// Level 1 keys destination groups, level 2 destination routers of the own group.
struct QKey {
  QLevel level = QLevel::group;
  int dest = 0;
  bool operator==(const QKey&) const = default;
};

struct Feedback {
  RouterId origin;  // downstream neighbor that produced the signal
  QKey key;
  double best_estimate_ns = 0.0;
  double queue_delay_ns = 0.0;
  double link_latency_ns = 0.0;

  double target() const { return link_latency_ns + queue_delay_ns + best_estimate_ns; }
};

// Two-level table of estimated delivery latencies (ns) for one router,
// indexed by non-host port slot (port number - hosts_per_router).
class QTable {
 public:
  QTable() = default;
  QTable(int groups, int routers_per_group, int port_slots, double init_ns)
      : groups_(groups), routers_(routers_per_group), slots_(port_slots) {
    const auto n = static_cast<std::size_t>((groups + routers_per_group) * port_slots);
    estimate_.assign(n, init_ns);
    updates_.assign(n, 0);
  }

  int port_slots() const { return slots_; }
  int rows(QLevel level) const { return level == QLevel::group ? groups_ : routers_; }
  std::uint64_t ignored_feedback() const { return ignored_; }

  bool contains(QKey key, int slot) const {
    return slot >= 0 && slot < slots_ && key.dest >= 0 && key.dest < rows(key.level);
  }

  double estimate(QKey key, int slot) const { return estimate_[index(key, slot)]; }
  std::uint64_t updates(QKey key, int slot) const { return updates_[index(key, slot)]; }
  void set(QKey key, int slot, double v) { estimate_[index(key, slot)] = v; }

  // Q <- (1 - alpha) Q + alpha * (link latency + queue delay + downstream best).
  // Unknown (slot, key) pairs are counted and dropped.
  bool update(QKey key, int slot, const Feedback& fb, double alpha) {
    if (!contains(key, slot)) {
      ++ignored_;
      return false;
    }
    const auto i = index(key, slot);
    const double target = std::max(0.0, fb.target());
    estimate_[i] = (1.0 - alpha) * estimate_[i] + alpha * target;
    ++updates_[i];
    return true;
  }

 private:
  std::size_t index(QKey key, int slot) const {
    const int row = key.level == QLevel::group ? key.dest : groups_ + key.dest;
    return static_cast<std::size_t>(row * slots_ + slot);
  }

  int groups_ = 0;
  int routers_ = 0;
  int slots_ = 0;
  std::vector<double> estimate_;
  std::vector<std::uint64_t> updates_;
  std::uint64_t ignored_ = 0;
};

inline int q_slot(const Topology& topo, const PortId& port) { return topo.port_number(port) - topo.hosts_per_router(); }

inline bool q_update(QTable& table, const Topology& topo, const PortId& port, QKey key, const Feedback& fb,
                     double alpha) {
  if (port.kind == PortKind::host) return table.update(key, -1, fb, alpha);
  return table.update(key, q_slot(topo, port), fb, alpha);
}

// Key a router at `here` uses for a packet headed to `dst`.
inline QKey q_key(RouterId here, RouterId dst) {
  return here.group != dst.group ? QKey{QLevel::group, dst.group} : QKey{QLevel::router, dst.local};
}

struct QRouteResult {
  PortId port;
  // This router's best estimate toward the packet's key, reported upstream.
  double best_estimate_ns = 0.0;
  bool explored = false;
};

namespace detail {

// Ports a Q-adaptive router may choose from, minimal ports first. An empty
// result means the route is forced (continue minimally).
inline std::vector<PortId> q_candidates(const Packet& pkt, const RouteContext& ctx, std::size_t& minimal_count) {
  const Topology& topo = ctx.topo;
  const RouterId here = ctx.here;
  const RouterId dst = dest_router(topo, pkt);
  const RouterId src = source_router(topo, pkt);
  std::vector<PortId> out;
  minimal_count = 0;
  if (here == dst) return out;

  auto append_rest = [&](PortKind kind, int count) {
    for (int i = 0; i < count; ++i) {
      PortId p{here, kind, i};
      if (kind == PortKind::global && topo.global_peer_group(here, i) < 0) continue;
      bool seen = false;
      for (std::size_t j = 0; j < minimal_count; ++j) seen = seen || out[j] == p;
      if (!seen) out.push_back(p);
    }
  };

  if (here.group == dst.group) {
    if (pkt.phase != RoutingPhase::AtSource) return out;
    out.push_back({here, PortKind::local, topo.local_port_index(here.local, dst.local)});
    minimal_count = 1;
    append_rest(PortKind::local, topo.routers_per_group() - 1);
    return out;
  }
  if (pkt.phase == RoutingPhase::AtSource) {
    for (const auto& p : topo.ports_toward_group(here, dst.group)) out.push_back(p);
    minimal_count = out.size();
    append_rest(PortKind::local, topo.routers_per_group() - 1);
    append_rest(PortKind::global, topo.global_links_per_router());
    return out;
  }
  if (here.group == src.group && here != src && !pkt.nonminimal && pkt.phase == RoutingPhase::MinimalToDest &&
      pkt.global_hops == 0) {
    for (const auto& p : topo.ports_toward_group(here, dst.group))
      if (p.kind == PortKind::global) out.push_back(p);
    minimal_count = out.size();
    append_rest(PortKind::global, topo.global_links_per_router());
    return out;
  }
  return out;
}

}  // namespace detail

// Q-adaptive forwarding: epsilon-greedy over the valid candidate ports using
// the router's table. Ties prefer minimal ports, then lower port numbers.
inline QRouteResult q_route(Packet& pkt, const RouteContext& ctx, const QTable& table, const QHyperparams& hp) {
  const Topology& topo = ctx.topo;
  const RouterId here = ctx.here;
  const RouterId dst = detail::dest_router(topo, pkt);
  QRouteResult res;
  if (here == dst) {
    res.port = continue_route(pkt, ctx);
    res.best_estimate_ns = 0.0;
    return res;
  }
  const QKey key = q_key(here, dst);
  std::size_t minimal_count = 0;
  const auto cands = detail::q_candidates(pkt, ctx, minimal_count);

  if (cands.empty()) {
    res.port = continue_route(pkt, ctx);
    res.best_estimate_ns = table.estimate(key, q_slot(topo, res.port));
    return res;
  }

  std::size_t best = 0;
  double best_est = table.estimate(key, q_slot(topo, cands[0]));
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const double e = table.estimate(key, q_slot(topo, cands[i]));
    if (e < best_est) {
      best_est = e;
      best = i;
    }
  }
  res.best_estimate_ns = best_est;
  std::size_t chosen = best;
  if (hp.epsilon > 0.0 && ctx.rng.uniform() < hp.epsilon) {
    chosen = static_cast<std::size_t>(ctx.rng.below(cands.size()));
    res.explored = true;
  }
  const PortId port = cands[chosen];
  res.port = port;

  if (here.group == dst.group) {
    pkt.phase = RoutingPhase::InDestGroup;
    if (chosen >= minimal_count) {
      pkt.nonminimal = true;
      pkt.detour_via = topo.local_port_target(here.local, port.index);
    }
    return res;
  }
  if (port.kind == PortKind::global) {
    const int peer = topo.global_peer_group(here, port.index);
    if (peer == dst.group) {
      pkt.phase = RoutingPhase::MinimalToDest;
    } else {
      pkt.nonminimal = true;
      pkt.mid_group = peer;
      pkt.phase = RoutingPhase::NonminToMid;
    }
  } else {
    // Local first hop: the next router picks the global link.
    pkt.phase = RoutingPhase::MinimalToDest;
  }
  return res;
}

inline void dump_qtable_csv(std::ostream& os, const Topology& topo, const std::vector<QTable>& tables,
                            bool header = true) {
  if (header) os << "router,level,dest_key,port,estimate_ns,updates\n";
  for (std::size_t r = 0; r < tables.size(); ++r) {
    const QTable& t = tables[r];
    for (QLevel level : {QLevel::group, QLevel::router})
      for (int dest = 0; dest < t.rows(level); ++dest)
        for (int slot = 0; slot < t.port_slots(); ++slot) {
          const QKey key{level, dest};
          os << r << "," << static_cast<int>(level) << "," << dest << "," << slot + topo.hosts_per_router() << ","
             << t.estimate(key, slot) << "," << t.updates(key, slot) << "\n";
        }
  }
}

}  // namespace dflysim
