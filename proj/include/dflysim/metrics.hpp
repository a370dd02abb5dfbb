#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dflysim/common.hpp"
#include "dflysim/engine.hpp"
#include "dflysim/workload.hpp"

namespace dflysim {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bytes per second. Also accepts any consistent unit pair: MB over ms gives GB/s.
inline double injection_rate(double total_bytes, double seconds) {
  if (!(seconds > 0.0)) throw MetricError("injection_rate: zero-duration job");
  return total_bytes / seconds;
}

// Largest number of bytes one rank posts between two blocking points
// (receive or wait), over all ranks of the program.
inline std::uint64_t peak_ingress(const MotifProgram& prog) {
  std::uint64_t peak = 0;
  for (const auto& steps : prog.steps) {
    std::uint64_t run = 0;
    for (const auto& s : steps) {
      if (s.kind == StepKind::send) {
        run += s.bytes;
        peak = std::max(peak, run);
      } else if (s.kind == StepKind::recv || s.kind == StepKind::wait_all) {
        run = 0;
      }
    }
  }
  return peak;
}

struct IntensityReport {
  int job = 0;
  std::string motif;
  std::uint64_t total_bytes = 0;
  Time exec_time = 0;
  double injection_rate_bps = 0.0;  // bytes per second
  std::uint64_t peak_ingress = 0;
};

inline IntensityReport intensity(const Simulation& sim, int job) {
  const JobInstance& j = sim.jobs().at(static_cast<std::size_t>(job));
  IntensityReport r;
  r.job = job;
  r.motif = j.program.motif;
  r.total_bytes = j.program.total_send_bytes();
  Time first = kNever, last = 0;
  for (const auto& rk : sim.ranks())
    if (rk.job == job) {
      first = std::min(first, rk.start_time);
      last = std::max(last, rk.end_time);
    }
  r.exec_time = last - first;
  r.peak_ingress = peak_ingress(j.program);
  r.injection_rate_bps = r.exec_time > 0 ? injection_rate(static_cast<double>(r.total_bytes), to_ns(r.exec_time) * 1e-9) : 0.0;
  return r;
}

// Nearest-rank percentile of an unsorted sample: the value at rank
// ceil(p/100 * n) in ascending order (so the median of {1,2,3,4} is 2).
template <typename T>
T percentile(std::vector<T> sample, double p) {
  if (sample.empty()) throw MetricError("percentile: empty sample");
  if (p < 0.0 || p > 100.0) throw MetricError("percentile: p must be in [0, 100]");
  const auto n = sample.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(rank - 1), sample.end());
  return sample[rank - 1];
}

struct LatencyStats {
  std::size_t count = 0;
  double mean_ns = 0.0;
  double median_ns = 0.0;
  double p95_ns = 0.0;
  double p99_ns = 0.0;
  double max_ns = 0.0;
  std::vector<double> bin_edges_ns;  // log-spaced; counts[i] covers [edges[i], edges[i+1])
  std::vector<std::uint64_t> counts;
};

inline LatencyStats latency_stats(const std::vector<double>& ns) {
  if (ns.empty()) throw MetricError("latency_stats: empty sample");
  LatencyStats s;
  s.count = ns.size();
  s.mean_ns = std::accumulate(ns.begin(), ns.end(), 0.0) / static_cast<double>(ns.size());
  s.median_ns = percentile(ns, 50.0);
  s.p95_ns = percentile(ns, 95.0);
  s.p99_ns = percentile(ns, 99.0);
  s.max_ns = *std::max_element(ns.begin(), ns.end());
  for (double e = 10.0; e <= std::max(1e4, s.max_ns * 1.26); e *= 1.2589254117941673) s.bin_edges_ns.push_back(e);
  s.bin_edges_ns.insert(s.bin_edges_ns.begin(), 0.0);
  s.counts.assign(s.bin_edges_ns.size(), 0);
  for (double v : ns) {
    const auto it = std::upper_bound(s.bin_edges_ns.begin(), s.bin_edges_ns.end(), v);
    ++s.counts[static_cast<std::size_t>(it - s.bin_edges_ns.begin()) - 1];
  }
  return s;
}

// Latencies (ns) of delivered packets; job < 0 selects all jobs. Packets whose
// deliver time falls outside [from, to) are skipped.
inline std::vector<double> packet_latencies(const std::vector<Packet>& packets, int job = -1, Time from = 0,
                                            Time to = kNever) {
  std::vector<double> out;
  for (const auto& p : packets)
    if (p.deliver_time >= 0 && (job < 0 || p.job == job) && p.deliver_time >= from && p.deliver_time < to)
      out.push_back(to_ns(p.latency()));
  return out;
}

struct TimelineBin {
  Time start = 0;
  std::uint64_t bytes = 0;
};

// Delivered bytes bucketed by deliver time.
inline std::vector<TimelineBin> throughput_timeline(const std::vector<Packet>& packets, Time bin, int job = -1,
                                                    Time end = -1) {
  if (bin <= 0) throw MetricError("throughput_timeline: bin must be positive");
  Time last = end;
  for (const auto& p : packets)
    if (p.deliver_time >= 0 && (job < 0 || p.job == job)) last = std::max(last, p.deliver_time);
  std::vector<TimelineBin> out;
  if (last < 0) return out;
  const auto n = static_cast<std::size_t>(last / bin + 1);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) out[i].start = static_cast<Time>(i) * bin;
  for (const auto& p : packets)
    if (p.deliver_time >= 0 && (job < 0 || p.job == job)) out[static_cast<std::size_t>(p.deliver_time / bin)].bytes += p.size;
  return out;
}

struct LinkRecord {
  int src_router = 0;
  int dst_router = 0;
  int src_port = 0;
  PortKind kind = PortKind::local;
  double gbps = 0.0;
  std::uint64_t bytes = 0;
  std::vector<std::uint64_t> bytes_by_job;
  Time stall = 0;
};

// Connected router-to-router links in (router, port) order.
inline std::vector<LinkRecord> link_records(const Simulation& sim) {
  const Topology& t = sim.topology();
  std::vector<LinkRecord> out;
  for (int r = 0; r < t.num_routers(); ++r)
    for (int port = t.hosts_per_router(); port < t.ports_per_router(); ++port) {
      const Channel& ch = t.channel(r, port);
      if (!ch.connected) continue;
      const PortStats& st = sim.port_stats(r, port);
      out.push_back({r, ch.peer_router, port, ch.kind, ch.gbps, st.bytes, st.bytes_by_job, st.stall});
    }
  return out;
}

// Average throughput over capacity.
inline double congestion_index(std::uint64_t bytes, Time duration, double gbps) {
  if (duration <= 0) throw MetricError("congestion_index: duration must be positive");
  const double rate = static_cast<double>(bytes) / (to_ns(duration) * 1e-9);
  return rate / (gbps / 8.0 * 1e9);
}

struct CongestionCell {
  int src_group = 0;
  int dst_group = 0;
  PortKind kind = PortKind::global;
  double index = 0.0;
  Time stall = 0;
};

// Mean congestion index per directed group pair (global links) and per group
// (local links, src_group == dst_group).
inline std::vector<CongestionCell> congestion_map(const Simulation& sim, Time duration) {
  const Topology& t = sim.topology();
  std::map<std::tuple<int, int, int>, std::pair<double, int>> acc;
  std::map<std::tuple<int, int, int>, Time> stall;
  for (const auto& l : link_records(sim)) {
    const int sg = t.router(l.src_router).group, dg = t.router(l.dst_router).group;
    const auto key = std::make_tuple(sg, dg, static_cast<int>(l.kind));
    auto& a = acc[key];
    a.first += congestion_index(l.bytes, duration, l.gbps);
    ++a.second;
    stall[key] += l.stall;
  }
  std::vector<CongestionCell> out;
  for (const auto& [k, v] : acc)
    out.push_back({std::get<0>(k), std::get<1>(k), static_cast<PortKind>(std::get<2>(k)), v.first / v.second, stall[k]});
  return out;
}

struct CommStats {
  int job = 0;
  std::size_t ranks = 0;
  double mean_ns = 0.0;
  double std_ns = 0.0;  // population standard deviation across ranks
};

inline CommStats comm_stats(const std::vector<double>& comm_ns, int job = 0) {
  CommStats c;
  c.job = job;
  c.ranks = comm_ns.size();
  if (comm_ns.empty()) return c;
  c.mean_ns = std::accumulate(comm_ns.begin(), comm_ns.end(), 0.0) / static_cast<double>(comm_ns.size());
  double ss = 0.0;
  for (double v : comm_ns) ss += (v - c.mean_ns) * (v - c.mean_ns);
  c.std_ns = std::sqrt(ss / static_cast<double>(comm_ns.size()));
  return c;
}

inline CommStats comm_stats(const Simulation& sim, int job) {
  std::vector<double> v;
  for (const auto& r : sim.ranks())
    if (r.job == job) v.push_back(to_ns(r.comm_time));
  return comm_stats(v, job);
}

inline double percent_delta(double base, double other) {
  if (base == 0.0) return other == 0.0 ? 0.0 : INFINITY;
  return (other - base) / base * 100.0;
}

}  // namespace dflysim
