// dflysim: simulate / compare / sweep front end.
#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "dflysim/dflysim.hpp"

extern char** environ;

namespace {

using namespace dflysim;
namespace fs = std::filesystem;

constexpr int kConfigExit = 3;
constexpr int kInvariantExit = 4;

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  const auto dots = s.find("..");
  if (dots != std::string::npos) {
    const auto lo = std::stoull(s.substr(0, dots)), hi = std::stoull(s.substr(dots + 2));
    if (hi < lo) throw ConfigError("seed range " + s + " is empty");
    for (auto v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
  if (out.empty()) throw ConfigError("no seeds given");
  return out;
}

int simulate(const std::string& scenario, const std::string& routing, std::optional<std::uint64_t> seed,
             const std::string& out, bool check) {
  Scenario s = load_scenario(scenario);
  if (!routing.empty()) s.engine.routing = parse_algorithm(routing);
  if (seed) s.engine.seed = *seed;
  if (check) s.engine.check_invariants = true;
  RunResult run = execute(s);
  write_outputs(run, s, out);
  const Simulation& sim = *run.sim;
  std::cout << s.name << " routing=" << to_string(s.engine.routing) << " seed=" << s.engine.seed
            << " status=" << to_string(sim.status()) << " end_ns=" << format_ns(sim.end_time())
            << " packets=" << sim.packets().size() << " wall_s=" << detail::fixed(run.wall_seconds, 2) << "\n";
  for (std::size_t k = 0; k < sim.jobs().size(); ++k) {
    const auto c = comm_stats(sim, static_cast<int>(k));
    std::cout << "  job " << k << " " << sim.jobs()[k].label << ": comm mean " << detail::fixed(c.mean_ns / 1e3, 3)
              << " us, std " << detail::fixed(c.std_ns / 1e3, 3) << " us\n";
  }
  if (sim.status() == RunStatus::deadlock) std::cerr << "deadlock: " << sim.diagnosis() << "\n";
  return exit_code(sim.status());
}

int compare(const std::string& base, const std::string& other, int job) {
  const auto r = compare_runs(base, other, job);
  std::cout << "job,base_mean_comm_ns,base_std_comm_ns,other_mean_comm_ns,other_std_comm_ns,comm_delta_pct,"
               "base_p95_ns,other_p95_ns,base_p99_ns,other_p99_ns\n";
  std::cout << job << ',' << detail::fixed(r.base.mean_ns, 3) << ',' << detail::fixed(r.base.std_ns, 3) << ','
            << detail::fixed(r.other.mean_ns, 3) << ',' << detail::fixed(r.other.std_ns, 3) << ','
            << detail::fixed(r.comm_delta_pct, 3) << ',' << detail::fixed(r.base_lat.p95_ns, 3) << ','
            << detail::fixed(r.other_lat.p95_ns, 3) << ',' << detail::fixed(r.base_lat.p99_ns, 3) << ','
            << detail::fixed(r.other_lat.p99_ns, 3) << '\n';
  return 0;
}

int sweep(const std::string& scenario, const std::string& routings, const std::string& seeds, const std::string& out,
          bool check) {
  const Scenario s = load_scenario(scenario);
  std::vector<std::string> algs;
  {
    std::stringstream ss(routings);
    std::string tok;
    while (std::getline(ss, tok, ',')) algs.push_back(to_string(parse_algorithm(tok)));
  }
  const auto seed_list = parse_seeds(seeds);
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DFLYSIM_THREADS")) cap = static_cast<unsigned>(std::max(1, std::atoi(env)));
  const std::string self = fs::read_symlink("/proc/self/exe").string();

  struct Job {
    std::string alg;
    std::uint64_t seed;
    fs::path dir;
  };
  std::vector<Job> todo;
  for (const auto& a : algs)
    for (auto sd : seed_list) todo.push_back({a, sd, fs::path(out) / s.name / a / ("seed" + std::to_string(sd))});

  std::map<pid_t, std::size_t> running;
  std::vector<int> codes(todo.size(), -1);
  std::size_t next = 0;
  while (next < todo.size() || !running.empty()) {
    while (next < todo.size() && running.size() < cap) {
      const Job& j = todo[next];
      std::vector<std::string> args{self, "simulate", "--scenario", scenario, "--routing", j.alg,
                                    "--seed", std::to_string(j.seed), "--out", j.dir.string(), "--quiet"};
      if (check) args.push_back("--check");
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      pid_t pid = 0;
      if (posix_spawn(&pid, self.c_str(), nullptr, nullptr, argv.data(), environ) != 0)
        throw std::runtime_error("posix_spawn failed");
      running[pid] = next++;
    }
    int status = 0;
    const pid_t pid = waitpid(-1, &status, 0);
    if (pid < 0) break;
    const auto idx = running.at(pid);
    running.erase(pid);
    codes[idx] = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
  }

  // Across-seed summary: median and spread of each job's mean comm time.
  std::cout << "routing,job_id,label,seeds,median_comm_ns,min_comm_ns,max_comm_ns,failed_runs\n";
  int worst = 0;
  for (const auto& a : algs) {
    std::map<int, std::vector<double>> per_job;
    std::map<int, std::string> labels;
    int failed = 0;
    for (std::size_t i = 0; i < todo.size(); ++i) {
      if (todo[i].alg != a) continue;
      if (codes[i] != 0) {
        ++failed;
        worst = std::max(worst, codes[i]);
        continue;
      }
      const auto t = read_csv(todo[i].dir / "commtime.csv");
      for (const auto& r : t.rows) {
        per_job[std::stoi(r[0])].push_back(std::stod(r[3]));
        labels[std::stoi(r[0])] = r[1];
      }
    }
    for (auto& [job, v] : per_job) {
      std::sort(v.begin(), v.end());
      std::cout << a << ',' << job << ',' << labels[job] << ',' << v.size() << ',' << detail::fixed(percentile(v, 50.0), 3)
                << ',' << detail::fixed(v.front(), 3) << ',' << detail::fixed(v.back(), 3) << ',' << failed << '\n';
    }
    if (per_job.empty()) std::cout << a << ",,,0,,,," << failed << '\n';
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flit-level Dragonfly interference simulator"};
  app.require_subcommand(1);

  std::string scenario, routing, out = "run", base, other, routings = "min,ugalg,ugaln,par,qadaptive", seeds = "1..5";
  std::uint64_t seed = 0;
  int job = 0;
  bool check = false, quiet = false;

  auto* sim = app.add_subcommand("simulate", "run one scenario");
  sim->add_option("--scenario", scenario, "scenario JSON")->required();
  sim->add_option("--routing", routing, "min | ugalg | ugaln | par | qadaptive (overrides the scenario)");
  auto* seed_opt = sim->add_option("--seed", seed, "RNG seed (overrides the scenario)");
  sim->add_option("--out", out, "output directory");
  sim->add_flag("--check", check, "assert credit conservation during the run");
  sim->add_flag("--quiet", quiet, "no summary on stdout");

  auto* cmp = app.add_subcommand("compare", "compare one job across two runs");
  cmp->add_option("--base", base)->required();
  cmp->add_option("--other", other)->required();
  cmp->add_option("--job", job)->required();

  auto* sw = app.add_subcommand("sweep", "run a scenario over routings and seeds in parallel processes");
  sw->add_option("--scenario", scenario)->required();
  sw->add_option("--routings", routings);
  sw->add_option("--seeds", seeds, "range a..b or comma list");
  sw->add_option("--out", out, "root output directory");
  sw->add_flag("--check", check);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) {
      std::streambuf* saved = nullptr;
      std::ostringstream sink;
      if (quiet) saved = std::cout.rdbuf(sink.rdbuf());
      const int rc = simulate(scenario, routing, *seed_opt ? std::optional<std::uint64_t>(seed) : std::nullopt, out, check);
      if (saved) std::cout.rdbuf(saved);
      return rc;
    }
    if (*cmp) return compare(base, other, job);
    if (*sw) return sweep(scenario, routings, seeds, out, check);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return kInvariantExit;
  }
  return 0;
}
