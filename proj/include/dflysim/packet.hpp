#pragma once

#include <cstdint>
#include <vector>

#include "dflysim/common.hpp"
#include "dflysim/topology.hpp"

namespace dflysim {

// Where a packet is in its route. Phases only move forward, except that a
// packet may leave MinimalToDest for NonminToMid once (progressive revision).
enum class RoutingPhase : std::uint8_t {
  AtSource,
  MinimalToDest,
  NonminToMid,
  InMidGroup,
  MinToDestGroup,
  InDestGroup,
  Ejected,
};

inline const char* to_string(RoutingPhase p) {
  switch (p) {
    case RoutingPhase::AtSource: return "AtSource";
    case RoutingPhase::MinimalToDest: return "MinimalToDest";
    case RoutingPhase::NonminToMid: return "NonminToMid";
    case RoutingPhase::InMidGroup: return "InMidGroup";
    case RoutingPhase::MinToDestGroup: return "MinToDestGroup";
    case RoutingPhase::InDestGroup: return "InDestGroup";
    case RoutingPhase::Ejected: return "Ejected";
  }
  return "?";
}

// One router-to-router traversal: the router it left, when the head flit
// left, the link kind and the VC it used on that link.
struct HopRecord {
  std::int32_t router = 0;
  Time time = 0;
  PortKind kind = PortKind::local;
  std::int8_t vc = 0;
  std::int8_t vc_slot = -1;  // position in the VC template of the last hop
};

struct Flit {
  std::int64_t packet = 0;
  std::uint16_t seq = 0;
  bool is_head = false;
  bool is_tail = false;
  std::uint32_t size = 128;
};

struct Packet {
  std::int64_t id = 0;
  std::int32_t job = 0;
  std::int32_t src_node = 0;
  std::int32_t dst_node = 0;
  std::uint32_t size = 0;  // bytes
  std::uint16_t flits = 0;
  std::int64_t message = -1;

  std::int8_t vc = 0;
  std::int8_t vc_slot = -1;  // position in the VC template of the last hop
  RoutingPhase phase = RoutingPhase::AtSource;
  std::int32_t mid_group = -1;
  std::int32_t detour_local = -1;  // router inside mid group to visit (UGALn/PAR)
  std::int32_t detour_via = -1;    // intra-group local detour router (Q-adaptive level 2)
  bool mid_reached = false;
  bool detour_done = false;
  bool nonminimal = false;
  bool revised = false;
  std::uint8_t local_hops = 0;
  std::uint8_t global_hops = 0;

  Time inject_time = -1;   // head flit leaves the source NIC
  Time deliver_time = -1;  // tail flit reaches the destination NIC
  std::vector<HopRecord> hops;

  std::size_t hop_count() const { return hops.size(); }
  Time latency() const { return deliver_time - inject_time; }
};

inline std::uint16_t flits_for(std::uint32_t bytes, std::uint32_t flit_bytes) {
  return static_cast<std::uint16_t>((bytes + flit_bytes - 1) / flit_bytes);
}

}  // namespace dflysim
