#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace dflysim;
namespace fs = std::filesystem;

namespace {

json desk_json() {
  return json::parse(R"({
    "topology": {"groups": 9, "routers_per_group": 4, "hosts_per_router": 2, "global_links_per_router": 2},
    "routing": "par",
    "seed": 3,
    "jobs": [
      {"motif": "ur", "ranks": 8, "params": {"msg_bytes": 1024, "count": 3}},
      {"motif": "halo3d", "ranks": 8, "params": {"msg_bytes": 2048, "iterations": 2}}
    ]
  })");
}

std::string config_error(const json& j) {
  try {
    parse_scenario(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dflysim_test_" + name);
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DFLYSIM_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Scenario, ParsesDeskScenario) {
  const Scenario s = parse_scenario(desk_json());
  EXPECT_EQ(s.topology.groups, 9);
  EXPECT_EQ(s.engine.routing, Algorithm::par);
  EXPECT_EQ(s.engine.seed, 3u);
  ASSERT_EQ(s.jobs.size(), 2u);
  EXPECT_EQ(s.jobs[1].motif, "halo3d");
  EXPECT_EQ(s.duration, kNever);
  // The echo re-parses to the same scenario.
  const Scenario again = parse_scenario(scenario_to_json(s));
  EXPECT_EQ(scenario_to_json(again), scenario_to_json(s));
}

TEST(Scenario, NamedErrors) {
  auto j = desk_json();
  j["colour"] = "blue";
  EXPECT_NE(config_error(j).find("unknown key 'colour'"), std::string::npos);
  j = desk_json();
  j["routing"] = "fastest";
  EXPECT_NE(config_error(j).find("unknown routing algorithm"), std::string::npos);
  j = desk_json();
  j["topology"]["routers_per_group"] = 1;
  EXPECT_NE(config_error(j).find("routers_per_group >= 2"), std::string::npos);
  j = desk_json();
  j["jobs"][0]["ranks"] = 70;
  EXPECT_NE(config_error(j).find("deficit 6"), std::string::npos);
  j = desk_json();
  j["jobs"][0]["placement"] = "scattered";
  EXPECT_NE(config_error(j).find("placement"), std::string::npos);
  j = desk_json();
  j["jobs"] = json::array();
  EXPECT_NE(config_error(j).find("at least one job"), std::string::npos);
}

TEST(Scenario, UnknownMotifParametersAreRejected) {
  JobSpec j;
  j.motif = "ur";
  j.ranks = 4;
  j.params = {{"msg_size", 3}};
  EXPECT_THROW(build_motif(j, 1, 0), ConfigError);
  j.params = json::object();
  j.motif = "bogus";
  EXPECT_THROW(build_motif(j, 1, 0), ConfigError);
}

TEST(Placement, DeterministicDisjointAndComplete) {
  std::vector<JobSpec> jobs(2);
  jobs[0].ranks = 528;
  jobs[1].ranks = 528;
  const auto a = place(jobs, 1056, 11), b = place(jobs, 1056, 11), c = place(jobs, 1056, 12);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::set<int> seen;
  for (const auto& job : a)
    for (int n : job) EXPECT_TRUE(seen.insert(n).second) << "node " << n << " placed twice";
  EXPECT_EQ(seen.size(), 1056u);
}

TEST(Placement, ContiguousJobStaysInOneGroup) {
  std::vector<JobSpec> jobs(1);
  jobs[0].ranks = 8;
  jobs[0].placement = PlacementPolicy::contiguous;
  const Topology t(dflysim::testing::desk_topology());
  const auto p = place(jobs, t.num_hosts(), 5);
  std::set<int> groups;
  for (int n : p[0]) groups.insert(t.node(n).router.group);
  EXPECT_EQ(groups.size(), 1u);
}

TEST(Placement, AddingALaterJobKeepsEarlierPlacement) {
  std::vector<JobSpec> one(1), two(2);
  one[0].ranks = two[0].ranks = 20;
  two[1].ranks = 30;
  EXPECT_EQ(place(one, 72, 4)[0], place(two, 72, 4)[0]);
}

TEST(Harness, SilentJobKeepsPlacementAndSendsNothing) {
  auto j = desk_json();
  Scenario loud = parse_scenario(j);
  j["jobs"][1]["silent"] = true;
  Scenario quiet = parse_scenario(j);
  const auto a = execute(loud), b = execute(quiet);
  EXPECT_EQ(a.placement, b.placement);
  for (const auto& p : b.sim->packets()) EXPECT_EQ(p.job, 0);
  EXPECT_EQ(comm_stats(*b.sim, 1).mean_ns, 0.0);
}

TEST(Harness, OutputsHaveTheDocumentedColumns) {
  const Scenario s = parse_scenario(desk_json());
  const auto run = execute(s);
  const fs::path dir = scratch("outputs");
  write_outputs(run, s, dir);
  auto header = [&](const char* f) { return read_csv(dir / f).header; };
  EXPECT_EQ(header("packets.csv"), (std::vector<std::string>{"packet_id", "job_id", "src_node", "dst_node", "size_bytes",
                                                             "inject_ns", "deliver_ns", "hops", "took_nonminimal"}));
  EXPECT_EQ(header("linkstats.csv"), (std::vector<std::string>{"src_router", "dst_router", "kind", "bytes_total",
                                                               "bytes_job_0", "bytes_job_1", "stall_ns"}));
  EXPECT_EQ(header("appstats.csv"),
            (std::vector<std::string>{"job_id", "rank", "node", "comm_ns", "compute_ns", "start_ns", "end_ns"}));
  EXPECT_EQ(header("throughput_timeline.csv"), (std::vector<std::string>{"job_id", "bin_start_ns", "bytes"}));
  for (const char* f : {"intensity.csv", "latency_summary.csv", "congestion_index.csv", "commtime.csv",
                        "stall_summary.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("status"), "completed");
  EXPECT_EQ(manifest.at("seed"), 3);
  EXPECT_TRUE(manifest.contains("input_hash"));
  const auto pk = read_csv(dir / "packets.csv");
  EXPECT_EQ(pk.rows.size(), run.sim->packets().size());
}

TEST(Harness, CompareIdenticalRunsIsZeroDelta) {
  const Scenario s = parse_scenario(desk_json());
  const fs::path a = scratch("cmp_a"), b = scratch("cmp_b");
  write_outputs(execute(s), s, a);
  write_outputs(execute(s), s, b);
  const auto r = compare_runs(a, b, 0);
  EXPECT_EQ(r.comm_delta_pct, 0.0);
  Scenario other = s;
  other.engine.seed = 4;
  const fs::path c = scratch("cmp_c");
  write_outputs(execute(other), other, c);
  EXPECT_THROW(compare_runs(a, c, 0), ConfigError);  // different placement
}

TEST(Cli, ExitCodesAndDeterminism) {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  const std::string scen = std::string(DFLYSIM_SCENARIOS) + "/pairwise_lu_ur.json";
  ASSERT_EQ(run_cli("simulate --scenario " + scen + " --seed 2 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("simulate --scenario " + scen + " --seed 2 --out " + (dir / "b").string()), 0);
  for (const char* f : {"packets.csv", "linkstats.csv", "appstats.csv"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;

  std::ofstream(dir / "bad.json") << R"({"topology": {"groups": 9, "routers_per_group": 4, "hosts_per_router": 2,
    "global_links_per_router": 2}, "jobs": [{"motif": "ur", "ranks": 80}]})";
  EXPECT_EQ(run_cli("simulate --scenario " + (dir / "bad.json").string() + " --out " + (dir / "c").string()), 3);
  EXPECT_EQ(run_cli("simulate --scenario " + (dir / "missing.json").string()), 3);
  EXPECT_NE(run_cli("simulate"), 0);
}
