#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dflysim/common.hpp"
#include "dflysim/packet.hpp"
#include "dflysim/topology.hpp"

namespace dflysim {

enum class Algorithm : std::uint8_t { min, ugalg, ugaln, par, qadaptive };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::min: return "min";
    case Algorithm::ugalg: return "ugalg";
    case Algorithm::ugaln: return "ugaln";
    case Algorithm::par: return "par";
    case Algorithm::qadaptive: return "qadaptive";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "min") return Algorithm::min;
  if (s == "ugalg") return Algorithm::ugalg;
  if (s == "ugaln") return Algorithm::ugaln;
  if (s == "par") return Algorithm::par;
  if (s == "qadaptive" || s == "q-adaptive" || s == "q") return Algorithm::qadaptive;
  throw ConfigError("unknown routing algorithm '" + s + "' (expected min, ugalg, ugaln, par, qadaptive)");
}

// Worst-case router hops each algorithm may emit.
inline int hop_budget(Algorithm a) {
  switch (a) {
    case Algorithm::min: return 3;
    case Algorithm::par: return 6;
    default: return 5;
  }
}

// VC schedule. Every route is embedded, hop by hop and as early as possible,
// into the template l,g,l,l,g,l; a hop's VC is the index of its template slot
// among slots of the same link kind. Channel ranks then strictly increase
// along every route, which rules out cyclic buffer dependencies, and VCs
// ascend per link kind.
struct VcSlot {
  int slot = -1;
  int vc = -1;
};

inline constexpr std::array<PortKind, 6> vc_template() {
  return {PortKind::local, PortKind::global, PortKind::local, PortKind::local, PortKind::global, PortKind::local};
}

// First template slot after `after` of the given kind; vc = -1 if none is left.
inline VcSlot next_vc_slot(int after, PortKind kind) {
  constexpr auto tpl = vc_template();
  int same = 0;
  for (int i = 0; i < static_cast<int>(tpl.size()); ++i) {
    if (tpl[static_cast<std::size_t>(i)] != kind) continue;
    if (i > after) return {i, same};
    ++same;
  }
  return {};
}

// Router-local view handed to routing functions.
struct RouteContext {
  const Topology& topo;
  RouterId here;
  Rng& rng;
  std::function<int(const PortId&)> occupancy;  // packets queued toward the port's downstream
  std::size_t* round_robin = nullptr;           // selection among parallel global links
  int bias = 0;

  std::size_t next_choice() const { return round_robin ? (*round_robin)++ : 0; }
};

struct MinimalCandidate {
  PortId port;
  int occupancy = 0;
};

struct NonminimalCandidate {
  PortId port;
  int occupancy = 0;
  int mid_group = -1;
};

struct CandidateSet {
  std::array<MinimalCandidate, 2> minimal{};
  std::array<NonminimalCandidate, 2> nonminimal{};
};

struct UgalDecision {
  bool minimal = true;
  PortId port;
  int mid_group = -1;
};

// Minimal iff qm < 2*qn + bias, where qm/qn are the best minimal and
// non-minimal occupancies. An idle pair (qm = qn = 0) stays minimal; any
// other tie goes non-minimal.
inline UgalDecision ugal_decide(const CandidateSet& cands, int bias) {
  const auto& m = cands.minimal[0].occupancy <= cands.minimal[1].occupancy ? cands.minimal[0] : cands.minimal[1];
  const auto& n =
      cands.nonminimal[0].occupancy <= cands.nonminimal[1].occupancy ? cands.nonminimal[0] : cands.nonminimal[1];
  const int qm = m.occupancy;
  const int qn = n.occupancy;
  if ((qm == 0 && qn == 0) || qm < 2 * qn + bias) return {true, m.port, -1};
  return {false, n.port, n.mid_group};
}

namespace detail {

inline RouterId dest_router(const Topology& topo, const Packet& pkt) { return topo.node(pkt.dst_node).router; }
inline RouterId source_router(const Topology& topo, const Packet& pkt) { return topo.node(pkt.src_node).router; }

inline PortId pick(const std::vector<PortId>& ports, const RouteContext& ctx) {
  return ports.size() == 1 ? ports.front() : ports[ctx.next_choice() % ports.size()];
}

// Minimal candidate ports from `here` toward the packet's destination router.
inline std::vector<PortId> minimal_ports(const RouteContext& ctx, RouterId dst) {
  if (ctx.here.group == dst.group)
    return {PortId{ctx.here, PortKind::local, ctx.topo.local_port_index(ctx.here.local, dst.local)}};
  return ctx.topo.ports_toward_group(ctx.here, dst.group);
}

// Global ports of `here` usable to start a non-minimal route (peer group is
// neither the source nor the destination group).
inline std::vector<NonminimalCandidate> own_global_candidates(const RouteContext& ctx, int src_group, int dst_group) {
  std::vector<NonminimalCandidate> out;
  for (int k = 0; k < ctx.topo.global_links_per_router(); ++k) {
    const int peer = ctx.topo.global_peer_group(ctx.here, k);
    if (peer < 0 || peer == src_group || peer == dst_group) continue;
    out.push_back({PortId{ctx.here, PortKind::global, k}, 0, peer});
  }
  return out;
}

}  // namespace detail

// Deterministic continuation of a packet's committed route: toward its
// intermediate group (if any), through the optional detour router, then
// minimally to the destination. Updates the phase.
inline PortId continue_route(Packet& pkt, const RouteContext& ctx) {
  const Topology& topo = ctx.topo;
  const RouterId here = ctx.here;
  const RouterId dst = detail::dest_router(topo, pkt);
  if (here == dst) {
    pkt.phase = RoutingPhase::Ejected;
    return PortId{here, PortKind::host, topo.node(pkt.dst_node).slot};
  }
  if (here.group == dst.group) {
    if (pkt.phase < RoutingPhase::InDestGroup) pkt.phase = RoutingPhase::InDestGroup;
    return PortId{here, PortKind::local, topo.local_port_index(here.local, dst.local)};
  }
  if (pkt.mid_group >= 0) {
    if (here.group == pkt.mid_group) pkt.mid_reached = true;
    if (!pkt.mid_reached) {
      pkt.phase = RoutingPhase::NonminToMid;
      return detail::pick(topo.ports_toward_group(here, pkt.mid_group), ctx);
    }
    if (here.group == pkt.mid_group) {
      if (pkt.detour_local >= 0 && !pkt.detour_done) {
        if (here.local == pkt.detour_local) {
          pkt.detour_done = true;
        } else {
          pkt.phase = RoutingPhase::InMidGroup;
          return PortId{here, PortKind::local, topo.local_port_index(here.local, pkt.detour_local)};
        }
      }
      pkt.phase = RoutingPhase::MinToDestGroup;
      return detail::pick(topo.ports_toward_group(here, dst.group), ctx);
    }
  }
  if (pkt.phase < RoutingPhase::MinimalToDest) pkt.phase = RoutingPhase::MinimalToDest;
  return detail::pick(topo.ports_toward_group(here, dst.group), ctx);
}

// Shortest path only.
inline PortId route_min(Packet& pkt, const RouteContext& ctx) {
  if (pkt.phase == RoutingPhase::AtSource) pkt.phase = RoutingPhase::MinimalToDest;
  return continue_route(pkt, ctx);
}

// Builds the UGAL candidate set at the current router. `own_globals_only`
// restricts non-minimal candidates to this router's global ports.
inline std::optional<CandidateSet> build_candidates(const Packet& pkt, const RouteContext& ctx, bool own_globals_only) {
  const Topology& topo = ctx.topo;
  const RouterId dst = detail::dest_router(topo, pkt);
  const int src_group = detail::source_router(topo, pkt).group;
  CandidateSet cs;
  const auto mins = detail::minimal_ports(ctx, dst);
  for (auto& m : cs.minimal) {
    m.port = mins[ctx.rng.below(mins.size())];
    m.occupancy = ctx.occupancy(m.port);
  }
  if (own_globals_only) {
    auto nm = detail::own_global_candidates(ctx, src_group, dst.group);
    if (nm.empty()) return std::nullopt;
    for (auto& n : cs.nonminimal) {
      n = nm[ctx.rng.below(nm.size())];
      n.occupancy = ctx.occupancy(n.port);
    }
  } else {
    const int g = topo.groups();
    const int excluded = src_group == dst.group ? 1 : 2;
    if (g - excluded <= 0) return std::nullopt;
    for (auto& n : cs.nonminimal) {
      int k = static_cast<int>(ctx.rng.below(static_cast<std::uint64_t>(g - excluded)));
      int mid = 0;
      for (;; ++mid) {
        if (mid == src_group || mid == dst.group) continue;
        if (k-- == 0) break;
      }
      n.mid_group = mid;
      const auto ports = topo.ports_toward_group(ctx.here, mid);
      n.port = detail::pick(ports, ctx);
      n.occupancy = ctx.occupancy(n.port);
    }
  }
  return cs;
}

namespace detail {

inline void commit_nonminimal(Packet& pkt, const RouteContext& ctx, int mid_group, bool visit_random_router) {
  pkt.nonminimal = true;
  pkt.mid_group = mid_group;
  pkt.phase = RoutingPhase::NonminToMid;
  if (visit_random_router)
    pkt.detour_local = static_cast<std::int32_t>(ctx.rng.below(static_cast<std::uint64_t>(ctx.topo.routers_per_group())));
}

// One-time source decision shared by UGALg, UGALn and PAR.
inline PortId ugal_source(Packet& pkt, const RouteContext& ctx, bool own_globals_only, bool visit_random_router) {
  const RouterId dst = dest_router(ctx.topo, pkt);
  if (ctx.here == dst) return continue_route(pkt, ctx);
  auto cands = build_candidates(pkt, ctx, own_globals_only);
  if (!cands) {
    pkt.phase = RoutingPhase::MinimalToDest;
    return continue_route(pkt, ctx);
  }
  const UgalDecision d = ugal_decide(*cands, ctx.bias);
  if (d.minimal) {
    pkt.phase = ctx.here.group == dst.group ? RoutingPhase::InDestGroup : RoutingPhase::MinimalToDest;
    return d.port;
  }
  commit_nonminimal(pkt, ctx, d.mid_group, visit_random_router);
  return d.port;
}

}  // namespace detail

// UGAL_group: after the source decision, the intermediate group is crossed minimally.
inline PortId route_ugalg(Packet& pkt, const RouteContext& ctx) {
  if (pkt.phase == RoutingPhase::AtSource) return detail::ugal_source(pkt, ctx, false, false);
  return continue_route(pkt, ctx);
}

// UGAL_node: non-minimal packets first visit a random router of the intermediate group.
inline PortId route_ugaln(Packet& pkt, const RouteContext& ctx) {
  if (pkt.phase == RoutingPhase::AtSource) return detail::ugal_source(pkt, ctx, true, true);
  return continue_route(pkt, ctx);
}

// Progressive adaptive routing: like UGALn, but a still-minimal packet may
// switch once to non-minimal at a later router of its source group.
inline PortId route_par(Packet& pkt, const RouteContext& ctx) {
  if (pkt.phase == RoutingPhase::AtSource) return detail::ugal_source(pkt, ctx, true, true);
  const Topology& topo = ctx.topo;
  const RouterId dst = detail::dest_router(topo, pkt);
  const RouterId src = detail::source_router(topo, pkt);
  if (pkt.phase == RoutingPhase::MinimalToDest && !pkt.revised && !pkt.nonminimal && ctx.here.group == src.group &&
      ctx.here.group != dst.group && ctx.here != src) {
    auto cands = build_candidates(pkt, ctx, true);
    if (cands) {
      const UgalDecision d = ugal_decide(*cands, ctx.bias);
      if (!d.minimal) {
        pkt.revised = true;
        detail::commit_nonminimal(pkt, ctx, d.mid_group, true);
        return d.port;
      }
      return d.port;
    }
  }
  return continue_route(pkt, ctx);
}

}  // namespace dflysim
