#pragma once
// Helpers shared by the unit tests and the acceptance driver.

#include <functional>
#include <vector>

#include "dflysim/dflysim.hpp"

namespace dflysim::testing {

// 9 groups x 4 routers x 2 hosts, two global links per router: 72 hosts and
// exactly one global link between every pair of groups.
inline TopologyConfig desk_topology() {
  TopologyConfig c;
  c.groups = 9;
  c.routers_per_group = 4;
  c.hosts_per_router = 2;
  c.global_links_per_router = 2;
  return c;
}

// Rank 0 sends `count` messages of `bytes` to rank 1.
inline MotifProgram one_way(std::uint64_t bytes, int count = 1) {
  MotifProgram p;
  p.motif = "flow";
  p.ranks = 2;
  p.steps.resize(2);
  for (int i = 0; i < count; ++i) {
    p.steps[0].push_back(Step::send(1, bytes, i));
    p.steps[1].push_back(Step::recv(0, i));
  }
  return p;
}

// Follows a routing function from the packet's source router to its
// destination, recording each router-to-router hop. Stops after `limit` hops.
struct Walk {
  Path hops;
  std::vector<VcSlot> vcs;
  bool vc_exhausted = false;
  bool arrived = false;
};

inline Walk walk_route(const Topology& topo, Packet pkt, Rng& rng, const std::function<int(const PortId&)>& occupancy,
                       const std::function<PortId(Packet&, const RouteContext&)>& step, int limit = 12) {
  Walk w;
  RouterId here = topo.node(pkt.src_node).router;
  std::size_t rr = 0;
  int slot = -1;
  for (int i = 0; i <= limit; ++i) {
    RouteContext ctx{topo, here, rng, occupancy, &rr, 0};
    const PortId port = step(pkt, ctx);
    if (port.kind == PortKind::host) {
      w.arrived = here == topo.node(pkt.dst_node).router;
      return w;
    }
    const VcSlot vs = next_vc_slot(slot, port.kind);
    if (vs.vc < 0) w.vc_exhausted = true;
    slot = vs.slot;
    w.hops.push_back(port);
    w.vcs.push_back(vs);
    if (port.kind == PortKind::global)
      ++pkt.global_hops;
    else
      ++pkt.local_hops;
    here = topo.neighbor(port);
  }
  return w;
}

// VC indices must strictly increase along a route, separately per link kind.
inline bool vcs_ascend_per_kind(const std::vector<HopRecord>& hops) {
  int last_local = -1, last_global = -1;
  for (const auto& h : hops) {
    int& last = h.kind == PortKind::global ? last_global : last_local;
    if (h.vc <= last) return false;
    last = h.vc;
  }
  return true;
}

}  // namespace dflysim::testing
