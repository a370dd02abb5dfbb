#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dflysim/common.hpp"

namespace dflysim {

struct LinkParams {
  double gbps = 200.0;
  double latency_ns = 30.0;
};

// Parametric Dragonfly: g groups of a fully connected routers, p hosts and
// h global links per router. Defaults are the 33-group, 1,056-host system.
struct TopologyConfig {
  int groups = 33;
  int routers_per_group = 8;
  int hosts_per_router = 4;
  int global_links_per_router = 4;
  LinkParams local_link{200.0, 30.0};
  LinkParams global_link{200.0, 300.0};
  LinkParams host_link{200.0, 30.0};

  void validate() const {
    if (groups < 2) throw ConfigError("topology: groups >= 2 violated (groups=" + std::to_string(groups) + ")");
    if (routers_per_group < 2)
      throw ConfigError("topology: routers_per_group >= 2 violated (routers_per_group=" +
                        std::to_string(routers_per_group) + ")");
    if (hosts_per_router < 1)
      throw ConfigError("topology: hosts_per_router >= 1 violated (hosts_per_router=" +
                        std::to_string(hosts_per_router) + ")");
    if (global_links_per_router < 1)
      throw ConfigError("topology: global_links_per_router >= 1 violated (global_links_per_router=" +
                        std::to_string(global_links_per_router) + ")");
    if (routers_per_group * global_links_per_router < groups - 1)
      throw ConfigError("topology: routers_per_group*global_links_per_router >= groups-1 violated (" +
                        std::to_string(routers_per_group * global_links_per_router) + " < " +
                        std::to_string(groups - 1) + ")");
    for (const auto* l : {&local_link, &global_link, &host_link}) {
      if (!(l->gbps > 0.0)) throw ConfigError("topology: link bandwidth must be positive");
      if (l->latency_ns < 0.0) throw ConfigError("topology: link latency must be non-negative");
    }
  }

  bool operator==(const TopologyConfig& o) const {
    return groups == o.groups && routers_per_group == o.routers_per_group &&
           hosts_per_router == o.hosts_per_router && global_links_per_router == o.global_links_per_router &&
           local_link.gbps == o.local_link.gbps && local_link.latency_ns == o.local_link.latency_ns &&
           global_link.gbps == o.global_link.gbps && global_link.latency_ns == o.global_link.latency_ns &&
           host_link.gbps == o.host_link.gbps && host_link.latency_ns == o.host_link.latency_ns;
  }
};

struct RouterId {
  int group = 0;
  int local = 0;
  auto operator<=>(const RouterId&) const = default;
};

struct NodeId {
  RouterId router;
  int slot = 0;
  auto operator<=>(const NodeId&) const = default;
};

enum class PortKind : std::uint8_t { host, local, global };

inline const char* to_string(PortKind k) {
  switch (k) {
    case PortKind::host: return "host";
    case PortKind::local: return "local";
    case PortKind::global: return "global";
  }
  return "?";
}

// A port on a router; `index` counts within its kind.
struct PortId {
  RouterId router;
  PortKind kind = PortKind::host;
  int index = 0;
  auto operator<=>(const PortId&) const = default;
};

using Path = std::vector<PortId>;

// Pattern string of a router-to-router path, e.g. "LGL".
inline std::string hop_pattern(const Path& path) {
  std::string s;
  for (const auto& p : path) s += p.kind == PortKind::global ? 'G' : (p.kind == PortKind::local ? 'L' : 'H');
  return s;
}

// Directed channel leaving one router port.
struct Channel {
  PortKind kind = PortKind::host;
  bool connected = false;
  int peer_router = -1;  // flat router id, -1 for a host link
  int peer_port = -1;    // flat port number on the peer router (or host slot)
  Time latency = 0;      // propagation
  double gbps = 0.0;
};

class Topology {
 public:
  explicit Topology(TopologyConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    g_ = cfg_.groups;
    a_ = cfg_.routers_per_group;
    p_ = cfg_.hosts_per_router;
    h_ = cfg_.global_links_per_router;
    links_per_pair_ = (a_ * h_) / (g_ - 1);
    build();
  }

  const TopologyConfig& config() const { return cfg_; }
  int groups() const { return g_; }
  int routers_per_group() const { return a_; }
  int hosts_per_router() const { return p_; }
  int global_links_per_router() const { return h_; }
  int num_routers() const { return g_ * a_; }
  int num_hosts() const { return g_ * a_ * p_; }
  int ports_per_router() const { return p_ + (a_ - 1) + h_; }
  int links_per_group_pair() const { return links_per_pair_; }

  int flat(RouterId r) const { return r.group * a_ + r.local; }
  RouterId router(int flat_id) const { return {flat_id / a_, flat_id % a_}; }
  int flat(NodeId n) const { return flat(n.router) * p_ + n.slot; }
  NodeId node(int flat_id) const { return {router(flat_id / p_), flat_id % p_}; }

  // Flat port numbering inside a router: hosts, then locals, then globals.
  int port_number(PortKind kind, int index) const {
    switch (kind) {
      case PortKind::host: return index;
      case PortKind::local: return p_ + index;
      case PortKind::global: return p_ + (a_ - 1) + index;
    }
    return -1;
  }
  int port_number(const PortId& port) const { return port_number(port.kind, port.index); }
  PortId port_id(RouterId r, int port_no) const {
    if (port_no < p_) return {r, PortKind::host, port_no};
    if (port_no < p_ + a_ - 1) return {r, PortKind::local, port_no - p_};
    return {r, PortKind::global, port_no - p_ - (a_ - 1)};
  }

  const Channel& channel(int router_flat, int port_no) const {
    return channels_[static_cast<std::size_t>(router_flat * ports_per_router() + port_no)];
  }
  const Channel& channel(const PortId& port) const { return channel(flat(port.router), port_number(port)); }

  // Local port index on router `from` leading to router `to_local` in the same group.
  int local_port_index(int from_local, int to_local) const { return to_local < from_local ? to_local : to_local - 1; }
  int local_port_target(int from_local, int index) const { return index < from_local ? index : index + 1; }

  struct Carrier {
    int router_local;  // router inside the source group holding the link
    int global_index;
  };

  // Global links from group `from` to group `to` (parallel links ordered by carrier).
  const std::vector<Carrier>& carriers(int from, int to) const {
    return carriers_[static_cast<std::size_t>(from * g_ + to)];
  }

  // Group reached by a connected global port, -1 if unconnected.
  int global_peer_group(RouterId r, int global_index) const {
    const Channel& c = channel(flat(r), port_number(PortKind::global, global_index));
    return c.connected ? c.peer_router / a_ : -1;
  }

  RouterId neighbor(const PortId& port) const { return router(channel(port).peer_router); }

  // First-hop ports from `r` on a minimal route toward `group` (r.group != group).
  // Routers holding a direct link use it; otherwise a local hop to a carrier.
  std::vector<PortId> ports_toward_group(RouterId r, int group) const {
    std::vector<PortId> out;
    const auto& cs = carriers(r.group, group);
    for (const auto& c : cs)
      if (c.router_local == r.local) out.push_back({r, PortKind::global, c.global_index});
    if (!out.empty()) return out;
    for (const auto& c : cs) {
      PortId p{r, PortKind::local, local_port_index(r.local, c.router_local)};
      bool dup = false;
      for (const auto& q : out) dup = dup || q == p;
      if (!dup) out.push_back(p);
    }
    return out;
  }

  // Minimal path (<= 3 router hops). `choice` selects among parallel global links.
  Path minimal_route(RouterId src, RouterId dst, std::size_t choice = 0) const {
    Path path;
    RouterId cur = src;
    if (cur == dst) return path;
    if (cur.group != dst.group) {
      auto first = ports_toward_group(cur, dst.group);
      PortId hop = first[choice % first.size()];
      if (hop.kind == PortKind::local) {
        path.push_back(hop);
        cur = neighbor(hop);
        auto g = ports_toward_group(cur, dst.group);
        hop = g[choice % g.size()];
      }
      path.push_back(hop);
      cur = neighbor(hop);
    }
    if (cur != dst) path.push_back({cur, PortKind::local, local_port_index(cur.local, dst.local)});
    return path;
  }

  // Route through an intermediate group. With `detour_local`, the packet first
  // visits that router inside the intermediate group.
  Path nonminimal_route(RouterId src, int mid_group, RouterId dst, std::optional<int> detour_local = std::nullopt,
                        std::size_t choice = 0) const {
    if (mid_group == src.group || mid_group == dst.group)
      throw std::invalid_argument("nonminimal_route: intermediate group must differ from source and destination groups");
    if (mid_group < 0 || mid_group >= g_) throw std::invalid_argument("nonminimal_route: intermediate group out of range");
    Path path;
    RouterId cur = src;
    auto first = ports_toward_group(cur, mid_group);
    PortId hop = first[choice % first.size()];
    if (hop.kind == PortKind::local) {
      path.push_back(hop);
      cur = neighbor(hop);
      hop = ports_toward_group(cur, mid_group)[choice % ports_toward_group(cur, mid_group).size()];
    }
    path.push_back(hop);
    cur = neighbor(hop);
    if (detour_local && *detour_local != cur.local) {
      path.push_back({cur, PortKind::local, local_port_index(cur.local, *detour_local)});
      cur = RouterId{cur.group, *detour_local};
    }
    Path rest = minimal_route(cur, dst, choice);
    path.insert(path.end(), rest.begin(), rest.end());
    return path;
  }

  // Canonical textual adjacency; equal configs serialize identically.
  std::string serialize() const {
    std::ostringstream os;
    os << "dragonfly g=" << g_ << " a=" << a_ << " p=" << p_ << " h=" << h_ << "\n";
    for (int r = 0; r < num_routers(); ++r)
      for (int port = 0; port < ports_per_router(); ++port) {
        const Channel& c = channel(r, port);
        os << r << ":" << port << " " << to_string(c.kind) << " " << (c.connected ? 1 : 0) << " " << c.peer_router
           << ":" << c.peer_port << " " << c.latency << " " << c.gbps << "\n";
      }
    return os.str();
  }

  std::size_t count_links(PortKind kind) const {
    std::size_t n = 0;
    for (const auto& c : channels_)
      if (c.connected && c.kind == kind) ++n;
    return kind == PortKind::host ? n : n / 2;  // undirected router-router links
  }

 private:
  void build() {
    const int ports = ports_per_router();
    channels_.assign(static_cast<std::size_t>(num_routers() * ports), Channel{});
    carriers_.assign(static_cast<std::size_t>(g_ * g_), {});
    const Time host_lat = from_ns(cfg_.host_link.latency_ns);
    const Time local_lat = from_ns(cfg_.local_link.latency_ns);
    const Time global_lat = from_ns(cfg_.global_link.latency_ns);

    for (int r = 0; r < num_routers(); ++r) {
      const RouterId rid = router(r);
      for (int s = 0; s < p_; ++s)
        channels_[static_cast<std::size_t>(r * ports + s)] =
            Channel{PortKind::host, true, -1, r * p_ + s, host_lat, cfg_.host_link.gbps};
      for (int i = 0; i < a_ - 1; ++i) {
        const int peer_local = local_port_target(rid.local, i);
        const int peer = flat(RouterId{rid.group, peer_local});
        channels_[static_cast<std::size_t>(r * ports + port_number(PortKind::local, i))] =
            Channel{PortKind::local, true, peer, port_number(PortKind::local, local_port_index(peer_local, rid.local)),
                    local_lat, cfg_.local_link.gbps};
      }
      for (int k = 0; k < h_; ++k)
        channels_[static_cast<std::size_t>(r * ports + port_number(PortKind::global, k))] =
            Channel{PortKind::global, false, -1, -1, global_lat, cfg_.global_link.gbps};
    }

    // Consecutive wiring: global port m = r*h + k of group i reaches group
    // i + 1 + (m mod (g-1)); copy c = m / (g-1) of offset d pairs with copy c
    // of offset g-d in the peer group.
    const int used = links_per_pair_ * (g_ - 1);
    auto port_of = [&](int offset, int copy) { return copy * (g_ - 1) + (offset - 1); };
    for (int i = 0; i < g_; ++i)
      for (int m = 0; m < used; ++m) {
        const int offset = 1 + m % (g_ - 1);
        const int copy = m / (g_ - 1);
        const int j = (i + offset) % g_;
        const int back = port_of(g_ - offset, copy);
        const RouterId here{i, m / h_};
        const RouterId there{j, back / h_};
        Channel& c = channels_[static_cast<std::size_t>(flat(here) * ports + port_number(PortKind::global, m % h_))];
        c.connected = true;
        c.peer_router = flat(there);
        c.peer_port = port_number(PortKind::global, back % h_);
        carriers_[static_cast<std::size_t>(i * g_ + j)].push_back({here.local, m % h_});
      }
  }

  TopologyConfig cfg_;
  int g_ = 0, a_ = 0, p_ = 0, h_ = 0;
  int links_per_pair_ = 0;
  std::vector<Channel> channels_;
  std::vector<std::vector<Carrier>> carriers_;
};

}  // namespace dflysim
