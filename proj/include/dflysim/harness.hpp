#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dflysim/engine.hpp"
#include "dflysim/metrics.hpp"
#include "dflysim/workload.hpp"

#ifndef DFLYSIM_VERSION
#define DFLYSIM_VERSION "0.1.0"
#endif

namespace dflysim {

using json = nlohmann::json;

enum class PlacementPolicy : std::uint8_t { random, contiguous };

struct JobSpec {
  std::string motif;
  int ranks = 0;
  json params = json::object();
  PlacementPolicy placement = PlacementPolicy::random;
  std::string label;
  bool silent = false;  // keeps its placement but sends nothing (standalone baselines)
};

struct Scenario {
  std::string name = "scenario";
  TopologyConfig topology;
  EngineConfig engine;
  std::vector<JobSpec> jobs;
  Time duration = kNever;  // kNever: run to drain
  Time timeline_bin = from_ns(100'000.0);
  std::string q_table_dump;
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

inline LinkParams link_from(const json& t, const char* gbps_key, const char* lat_key, LinkParams fallback) {
  return {get_or(t, gbps_key, fallback.gbps), get_or(t, lat_key, fallback.latency_ns)};
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace detail

inline const char* to_string(PlacementPolicy p) { return p == PlacementPolicy::random ? "random" : "contiguous"; }

inline TopologyConfig parse_topology(const json& t) {
  detail::reject_unknown(t,
                         {"groups", "routers_per_group", "hosts_per_router", "global_links_per_router", "local_link_gbps",
                          "global_link_gbps", "local_latency_ns", "global_latency_ns", "host_link_gbps",
                          "host_latency_ns"},
                         "topology");
  TopologyConfig c;
  c.groups = detail::get_or(t, "groups", c.groups);
  c.routers_per_group = detail::get_or(t, "routers_per_group", c.routers_per_group);
  c.hosts_per_router = detail::get_or(t, "hosts_per_router", c.hosts_per_router);
  c.global_links_per_router = detail::get_or(t, "global_links_per_router", c.global_links_per_router);
  c.local_link = detail::link_from(t, "local_link_gbps", "local_latency_ns", c.local_link);
  c.global_link = detail::link_from(t, "global_link_gbps", "global_latency_ns", c.global_link);
  // Host links follow the local link unless given.
  c.host_link = detail::link_from(t, "host_link_gbps", "host_latency_ns", c.local_link);
  c.validate();
  return c;
}

inline json topology_to_json(const TopologyConfig& c) {
  return {{"groups", c.groups},
          {"routers_per_group", c.routers_per_group},
          {"hosts_per_router", c.hosts_per_router},
          {"global_links_per_router", c.global_links_per_router},
          {"local_link_gbps", c.local_link.gbps},
          {"global_link_gbps", c.global_link.gbps},
          {"local_latency_ns", c.local_link.latency_ns},
          {"global_latency_ns", c.global_link.latency_ns},
          {"host_link_gbps", c.host_link.gbps},
          {"host_latency_ns", c.host_link.latency_ns}};
}

inline Scenario parse_scenario(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario: top level must be an object");
  detail::reject_unknown(j,
                         {"name", "topology", "routing", "ugal_bias", "q_alpha", "q_epsilon", "q_init_ns",
                          "q_table_dump", "seed", "duration", "jobs", "timeline_bin_ns", "check_invariants",
                          "buffer_packets", "description"},
                         "scenario");
  Scenario s;
  s.name = detail::get_or<std::string>(j, "name", s.name);
  s.topology = parse_topology(j.value("topology", json::object()));
  EngineConfig& e = s.engine;
  e.routing = parse_algorithm(detail::get_or<std::string>(j, "routing", "min"));
  e.ugal_bias = detail::get_or(j, "ugal_bias", e.ugal_bias);
  e.q.alpha = detail::get_or(j, "q_alpha", e.q.alpha);
  e.q.epsilon = detail::get_or(j, "q_epsilon", e.q.epsilon);
  e.q.init_ns = detail::get_or(j, "q_init_ns", e.q.init_ns);
  e.seed = detail::get_or<std::uint64_t>(j, "seed", 1);
  e.check_invariants = detail::get_or(j, "check_invariants", false);
  e.buffer_packets = detail::get_or(j, "buffer_packets", e.buffer_packets);
  s.q_table_dump = detail::get_or<std::string>(j, "q_table_dump", "");
  s.timeline_bin = from_ns(detail::get_or(j, "timeline_bin_ns", 100'000.0));
  if (s.timeline_bin <= 0) throw ConfigError("scenario: timeline_bin_ns must be positive");
  if (j.contains("duration")) {
    const json& d = j.at("duration");
    if (d.is_string() && d.get<std::string>() == "drain")
      s.duration = kNever;
    else if (d.is_object() && d.contains("fixed_ns"))
      s.duration = from_ns(d.at("fixed_ns").get<double>());
    else if (d.is_number())
      s.duration = from_ns(d.get<double>());
    else
      throw ConfigError("scenario: duration must be \"drain\", a number of ns or {\"fixed_ns\": n}");
  }
  if (!j.contains("jobs") || !j.at("jobs").is_array() || j.at("jobs").empty())
    throw ConfigError("scenario: at least one job is required");
  int total = 0;
  for (const auto& jj : j.at("jobs")) {
    detail::reject_unknown(jj, {"motif", "ranks", "params", "placement", "label", "silent"}, "job");
    JobSpec js;
    js.motif = detail::get_or<std::string>(jj, "motif", "");
    if (js.motif.empty()) throw ConfigError("job: motif is required");
    js.ranks = detail::get_or(jj, "ranks", 0);
    if (js.ranks < 1) throw ConfigError("job '" + js.motif + "': ranks >= 1 required");
    js.params = jj.value("params", json::object());
    const auto pl = detail::get_or<std::string>(jj, "placement", "random");
    if (pl == "random")
      js.placement = PlacementPolicy::random;
    else if (pl == "contiguous")
      js.placement = PlacementPolicy::contiguous;
    else
      throw ConfigError("job '" + js.motif + "': placement must be random or contiguous");
    js.label = detail::get_or<std::string>(jj, "label", js.motif);
    js.silent = detail::get_or(jj, "silent", false);
    total += js.ranks;
    s.jobs.push_back(std::move(js));
  }
  const int hosts = s.topology.groups * s.topology.routers_per_group * s.topology.hosts_per_router;
  if (total > hosts)
    throw ConfigError("scenario: jobs need " + std::to_string(total) + " hosts but the topology has " +
                      std::to_string(hosts) + " (deficit " + std::to_string(total - hosts) + ")");
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scenario '" + path + "': " + e.what());
  }
  Scenario s = parse_scenario(j);
  if (!j.contains("name")) s.name = std::filesystem::path(path).stem().string();
  return s;
}

inline json scenario_to_json(const Scenario& s) {
  json jobs = json::array();
  for (const auto& js : s.jobs)
    jobs.push_back({{"motif", js.motif},
                    {"ranks", js.ranks},
                    {"params", js.params},
                    {"placement", to_string(js.placement)},
                    {"label", js.label},
                    {"silent", js.silent}});
  json j = {{"name", s.name},
            {"topology", topology_to_json(s.topology)},
            {"routing", to_string(s.engine.routing)},
            {"ugal_bias", s.engine.ugal_bias},
            {"q_alpha", s.engine.q.alpha},
            {"q_epsilon", s.engine.q.epsilon},
            {"q_init_ns", s.engine.q.init_ns},
            {"seed", s.engine.seed},
            {"buffer_packets", s.engine.buffer_packets},
            {"check_invariants", s.engine.check_invariants},
            {"timeline_bin_ns", to_ns(s.timeline_bin)},
            {"jobs", jobs}};
  j["duration"] = s.duration == kNever ? json("drain") : json{{"fixed_ns", to_ns(s.duration)}};
  if (!s.q_table_dump.empty()) j["q_table_dump"] = s.q_table_dump;
  return j;
}

// Assigns hosts to every job in order. Job k draws from its own sub-seed, so
// a job's mapping depends only on the seed and the jobs placed before it.
inline std::vector<std::vector<int>> place(const std::vector<JobSpec>& jobs, int hosts, std::uint64_t seed) {
  std::vector<char> used(static_cast<std::size_t>(hosts), 0);
  std::vector<std::vector<int>> out;
  int free_count = hosts;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const int need = jobs[k].ranks;
    if (need > free_count)
      throw ConfigError("placement: job " + std::to_string(k) + " needs " + std::to_string(need) + " hosts, " +
                        std::to_string(free_count) + " free (deficit " + std::to_string(need - free_count) + ")");
    std::vector<int> free;
    for (int n = 0; n < hosts; ++n)
      if (!used[static_cast<std::size_t>(n)]) free.push_back(n);
    std::vector<int> nodes;
    if (jobs[k].placement == PlacementPolicy::contiguous) {
      nodes.assign(free.begin(), free.begin() + need);
    } else {
      Rng rng(mix_seed(seed, 1000 + k));
      for (int i = 0; i < need; ++i) {
        const auto j = static_cast<std::size_t>(i) + rng.below(free.size() - static_cast<std::size_t>(i));
        std::swap(free[static_cast<std::size_t>(i)], free[j]);
      }
      nodes.assign(free.begin(), free.begin() + need);
    }
    for (int n : nodes) used[static_cast<std::size_t>(n)] = 1;
    free_count -= need;
    out.push_back(std::move(nodes));
  }
  return out;
}

// Builds a motif program from a job description. Defaults are the
// full-scale message sizes; desk scenarios override them.
inline MotifProgram build_motif(const JobSpec& js, std::uint64_t seed, std::size_t job_index) {
  const json& p = js.params;
  const std::string& m = js.motif;
  auto bytes = [&](std::uint64_t d) { return detail::get_or<std::uint64_t>(p, "msg_bytes", d); };
  const int iters = detail::get_or(p, "iterations", 1);
  const Time compute = from_ns(detail::get_or(p, "compute_ns", 0.0));
  auto dims = [&](int k) {
    if (p.contains("dims")) return p.at("dims").get<std::vector<int>>();
    return balanced_dims(js.ranks, k);
  };
  std::set<std::string> allowed{"msg_bytes", "iterations", "compute_ns"};
  MotifProgram prog;
  if (m == "ur") {
    allowed.insert("count");
    Rng rng(mix_seed(seed, 2000 + job_index));
    prog = motif_ur(js.ranks, bytes(3070), detail::get_or(p, "count", iters), rng, compute);
  } else if (m == "lu") {
    prog = motif_sweep_lu(js.ranks, bytes(15'000), iters, compute);
  } else if (m == "fft3d") {
    prog = motif_fft3d(js.ranks, bytes(51'680), iters, compute);
  } else if (m == "halo3d" || m == "lqcd" || m == "stencil5d") {
    allowed.insert("dims");
    const int k = m == "halo3d" ? 3 : (m == "lqcd" ? 4 : 5);
    const std::uint64_t d = m == "halo3d" ? 191'667 : (m == "lqcd" ? 575'000 : 1'400'000);
    const auto ds = dims(k);
    if (static_cast<int>(ds.size()) != k) throw ConfigError("job '" + m + "': dims must have " + std::to_string(k) + " entries");
    prog = motif_stencil(js.ranks, ds, bytes(d), iters, compute, m);
  } else if (m == "cosmoflow" || m == "dl" || m == "allreduce") {
    allowed.insert({"interval_ns", "rounds"});
    const double interval = m == "cosmoflow" ? 5.16e6 : (m == "dl" ? 5.16e6 / 4.7 : 0.0);
    const int rounds = m == "cosmoflow" ? 2 : (m == "dl" ? 8 : 1);
    prog = motif_allreduce(js.ranks, bytes(m == "allreduce" ? 4096 : (m == "dl" ? 1'150'000 : 1'126'000)),
                           from_ns(detail::get_or(p, "interval_ns", interval)), detail::get_or(p, "rounds", rounds), m);
  } else if (m == "lulesh") {
    allowed.insert({"stencil_bytes", "sweep_bytes"});
    prog = motif_lulesh(js.ranks, detail::get_or<std::uint64_t>(p, "stencil_bytes", 75'000),
                        detail::get_or<std::uint64_t>(p, "sweep_bytes", 4'970), iters, compute);
  } else if (m == "alltoall") {
    prog = motif_alltoall(js.ranks, bytes(4096), iters);
  } else if (m == "permutation") {
    allowed.insert({"shift", "count"});
    const int shift = detail::get_or(p, "shift", js.ranks / 2);
    std::vector<int> dest(static_cast<std::size_t>(js.ranks));
    for (int r = 0; r < js.ranks; ++r) dest[static_cast<std::size_t>(r)] = ((r + shift) % js.ranks + js.ranks) % js.ranks;
    prog = motif_permutation(dest, bytes(512), detail::get_or(p, "count", 100));
  } else {
    throw ConfigError("unknown motif '" + m +
                      "' (expected ur, lu, fft3d, halo3d, lqcd, stencil5d, cosmoflow, dl, allreduce, lulesh, alltoall, "
                      "permutation)");
  }
  detail::reject_unknown(p, allowed, "job '" + m + "' params");
  return prog;
}

struct RunResult {
  std::unique_ptr<Simulation> sim;
  std::vector<std::vector<int>> placement;
  double wall_seconds = 0.0;
};

inline RunResult execute(const Scenario& s) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.sim = std::make_unique<Simulation>(s.topology, s.engine);
  const int hosts = res.sim->topology().num_hosts();
  res.placement = place(s.jobs, hosts, s.engine.seed);
  for (std::size_t k = 0; k < s.jobs.size(); ++k) {
    MotifProgram prog = build_motif(s.jobs[k], s.engine.seed, k);
    if (s.jobs[k].silent)
      for (auto& steps : prog.steps) steps.clear();
    res.sim->add_job(std::move(prog), res.placement[k], s.jobs[k].label);
  }
  res.sim->run(s.duration);
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// --- outputs -----------------------------------------------------------------

inline void write_packets_csv(std::ostream& os, const Simulation& sim) {
  os << "packet_id,job_id,src_node,dst_node,size_bytes,inject_ns,deliver_ns,hops,took_nonminimal\n";
  for (const auto& p : sim.packets()) {
    if (p.inject_time < 0) continue;
    os << p.id << ',' << p.job << ',' << p.src_node << ',' << p.dst_node << ',' << p.size << ','
       << format_ns(p.inject_time) << ',' << (p.deliver_time >= 0 ? format_ns(p.deliver_time) : "") << ','
       << p.hops.size() << ',' << (p.nonminimal ? 1 : 0) << '\n';
  }
}

inline void write_linkstats_csv(std::ostream& os, const Simulation& sim) {
  os << "src_router,dst_router,kind";
  os << ",bytes_total";
  for (std::size_t k = 0; k < sim.jobs().size(); ++k) os << ",bytes_job_" << k;
  os << ",stall_ns\n";
  for (const auto& l : link_records(sim)) {
    os << l.src_router << ',' << l.dst_router << ',' << to_string(l.kind) << ',' << l.bytes;
    for (auto b : l.bytes_by_job) os << ',' << b;
    os << ',' << format_ns(l.stall) << '\n';
  }
}

inline void write_appstats_csv(std::ostream& os, const Simulation& sim) {
  os << "job_id,rank,node,comm_ns,compute_ns,start_ns,end_ns\n";
  for (const auto& r : sim.ranks())
    os << r.job << ',' << r.rank << ',' << r.node << ',' << format_ns(r.comm_time) << ',' << format_ns(r.compute_time)
       << ',' << format_ns(r.start_time) << ',' << (r.end_time >= 0 ? format_ns(r.end_time) : "") << '\n';
}

inline void write_intensity_csv(std::ostream& os, const Simulation& sim) {
  os << "job_id,motif,ranks,total_bytes,exec_ns,injection_rate_gbps,peak_ingress_bytes\n";
  for (std::size_t k = 0; k < sim.jobs().size(); ++k) {
    const auto r = intensity(sim, static_cast<int>(k));
    os << k << ',' << r.motif << ',' << sim.jobs()[k].program.ranks << ',' << r.total_bytes << ','
       << format_ns(r.exec_time) << ',' << detail::fixed(r.injection_rate_bps / 1e9) << ',' << r.peak_ingress << '\n';
  }
}

inline void write_latency_summary_csv(std::ostream& os, const Simulation& sim) {
  os << "job_id,count,mean_ns,median_ns,p95_ns,p99_ns,max_ns\n";
  auto row = [&](const std::string& id, int job) {
    const auto v = packet_latencies(sim.packets(), job);
    if (v.empty()) return;
    const auto s = latency_stats(v);
    os << id << ',' << s.count << ',' << detail::fixed(s.mean_ns, 3) << ',' << detail::fixed(s.median_ns, 3) << ','
       << detail::fixed(s.p95_ns, 3) << ',' << detail::fixed(s.p99_ns, 3) << ',' << detail::fixed(s.max_ns, 3) << '\n';
  };
  for (std::size_t k = 0; k < sim.jobs().size(); ++k) row(std::to_string(k), static_cast<int>(k));
  row("all", -1);
}

inline void write_congestion_csv(std::ostream& os, const Simulation& sim) {
  os << "src_group,dst_group,kind,index\n";
  if (sim.end_time() <= 0) return;
  for (const auto& c : congestion_map(sim, sim.end_time()))
    os << c.src_group << ',' << c.dst_group << ',' << to_string(c.kind) << ',' << detail::fixed(c.index, 6) << '\n';
}

inline void write_stall_csv(std::ostream& os, const Simulation& sim) {
  os << "src_group,dst_group,kind,stall_ns\n";
  if (sim.end_time() <= 0) return;
  for (const auto& c : congestion_map(sim, sim.end_time()))
    os << c.src_group << ',' << c.dst_group << ',' << to_string(c.kind) << ',' << format_ns(c.stall) << '\n';
}

inline void write_timeline_csv(std::ostream& os, const Simulation& sim, Time bin) {
  os << "job_id,bin_start_ns,bytes\n";
  for (std::size_t k = 0; k < sim.jobs().size(); ++k)
    for (const auto& b : throughput_timeline(sim.packets(), bin, static_cast<int>(k), sim.end_time()))
      os << k << ',' << format_ns(b.start) << ',' << b.bytes << '\n';
}

inline void write_commtime_csv(std::ostream& os, const Simulation& sim) {
  os << "job_id,label,ranks,mean_comm_ns,std_comm_ns\n";
  for (std::size_t k = 0; k < sim.jobs().size(); ++k) {
    const auto c = comm_stats(sim, static_cast<int>(k));
    os << k << ',' << sim.jobs()[k].label << ',' << c.ranks << ',' << detail::fixed(c.mean_ns, 3) << ','
       << detail::fixed(c.std_ns, 3) << '\n';
  }
}

inline int exit_code(RunStatus s) { return s == RunStatus::deadlock ? 2 : 0; }

// Writes every CSV and manifest.json into `dir`.
inline void write_outputs(const RunResult& run, const Scenario& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Simulation& sim = *run.sim;
  auto emit = [&](const char* file, auto&& fn) {
    std::ofstream os(dir / file);
    if (!os) throw ConfigError(std::string("cannot write ") + (dir / file).string());
    fn(os);
  };
  emit("packets.csv", [&](std::ostream& os) { write_packets_csv(os, sim); });
  emit("linkstats.csv", [&](std::ostream& os) { write_linkstats_csv(os, sim); });
  emit("appstats.csv", [&](std::ostream& os) { write_appstats_csv(os, sim); });
  emit("intensity.csv", [&](std::ostream& os) { write_intensity_csv(os, sim); });
  emit("latency_summary.csv", [&](std::ostream& os) { write_latency_summary_csv(os, sim); });
  emit("congestion_index.csv", [&](std::ostream& os) { write_congestion_csv(os, sim); });
  emit("stall_summary.csv", [&](std::ostream& os) { write_stall_csv(os, sim); });
  emit("throughput_timeline.csv", [&](std::ostream& os) { write_timeline_csv(os, sim, s.timeline_bin); });
  emit("commtime.csv", [&](std::ostream& os) { write_commtime_csv(os, sim); });
  if (!s.q_table_dump.empty() && !sim.qtables().empty()) {
    const std::filesystem::path qp = s.q_table_dump;
    std::ofstream os(qp.is_absolute() ? qp : dir / qp);
    dump_qtable_csv(os, sim.topology(), sim.qtables());
  }
  const json cfg = scenario_to_json(s);
  json placement = json::array();
  for (const auto& p : run.placement) placement.push_back(p);
  json m = {{"scenario", cfg},
            {"input_hash", detail::hex64(detail::fnv1a(cfg.dump()))},
            {"seed", s.engine.seed},
            {"routing", to_string(s.engine.routing)},
            {"code_version", DFLYSIM_VERSION},
            {"status", to_string(sim.status())},
            {"diagnosis", sim.diagnosis()},
            {"end_ns", format_ns(sim.end_time())},
            {"events", sim.events_processed()},
            {"packets", sim.packets().size()},
            {"placement", placement},
            {"wall_clock_s", run.wall_seconds}};
  std::ofstream os(dir / "manifest.json");
  os << m.dump(2) << '\n';
}

// --- compare -------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw ConfigError("csv: missing column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string x;
    while (std::getline(ss, x, ',')) f.push_back(x);
    if (!l.empty() && l.back() == ',') f.emplace_back();
    return f;
  };
  if (!std::getline(in, line)) throw ConfigError(path.string() + " is empty");
  t.header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split(line));
  return t;
}

struct CompareReport {
  int job = 0;
  CommStats base, other;
  double comm_delta_pct = 0.0;
  LatencyStats base_lat, other_lat;
};

// Compares one job across two run directories. The job's rank-to-node
// mapping must be identical in both.
inline CompareReport compare_runs(const std::filesystem::path& base, const std::filesystem::path& other, int job) {
  auto load = [&](const std::filesystem::path& dir, std::vector<int>& nodes, std::vector<double>& comm,
                  std::vector<double>& lat) {
    const auto a = read_csv(dir / "appstats.csv");
    const int cj = a.column("job_id"), cr = a.column("rank"), cn = a.column("node"), cc = a.column("comm_ns");
    std::map<int, std::pair<int, double>> by_rank;
    for (const auto& r : a.rows)
      if (std::stoi(r[static_cast<std::size_t>(cj)]) == job)
        by_rank[std::stoi(r[static_cast<std::size_t>(cr)])] = {std::stoi(r[static_cast<std::size_t>(cn)]),
                                                                std::stod(r[static_cast<std::size_t>(cc)])};
    for (const auto& [rank, v] : by_rank) {
      nodes.push_back(v.first);
      comm.push_back(v.second);
    }
    const auto p = read_csv(dir / "packets.csv");
    const int pj = p.column("job_id"), pi = p.column("inject_ns"), pd = p.column("deliver_ns");
    for (const auto& r : p.rows)
      if (std::stoi(r[static_cast<std::size_t>(pj)]) == job && !r[static_cast<std::size_t>(pd)].empty())
        lat.push_back(std::stod(r[static_cast<std::size_t>(pd)]) - std::stod(r[static_cast<std::size_t>(pi)]));
  };
  std::vector<int> nb, no;
  std::vector<double> cb, co, lb, lo;
  load(base, nb, cb, lb);
  load(other, no, co, lo);
  if (nb.empty()) throw ConfigError("compare: job " + std::to_string(job) + " not found in " + base.string());
  if (nb != no)
    throw ConfigError("compare: placement of job " + std::to_string(job) +
                      " differs between runs; interference deltas would be meaningless");
  CompareReport r;
  r.job = job;
  r.base = comm_stats(cb, job);
  r.other = comm_stats(co, job);
  r.comm_delta_pct = percent_delta(r.base.mean_ns, r.other.mean_ns);
  if (!lb.empty()) r.base_lat = latency_stats(lb);
  if (!lo.empty()) r.other_lat = latency_stats(lo);
  return r;
}

}  // namespace dflysim
