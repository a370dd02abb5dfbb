#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dflysim/common.hpp"
#include "dflysim/event_queue.hpp"
#include "dflysim/packet.hpp"
#include "dflysim/qlearn.hpp"
#include "dflysim/routing.hpp"
#include "dflysim/topology.hpp"
#include "dflysim/workload.hpp"

namespace dflysim {

struct EngineConfig {
  std::uint32_t flit_bytes = 128;
  std::uint32_t packet_bytes = 512;
  int buffer_packets = 30;  // per VC, credits are whole packets
  int local_vcs = 4;
  int global_vcs = 2;
  Algorithm routing = Algorithm::min;
  int ugal_bias = 0;
  QHyperparams q;
  std::uint64_t seed = 1;
  bool check_invariants = false;
  Time watchdog = from_ns(500'000.0);  // no flit movement for this long with packets in flight = deadlock
  bool record_hops = true;
};

enum class RunStatus : std::uint8_t { completed, time_limit, deadlock };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::time_limit: return "time_limit";
    case RunStatus::deadlock: return "deadlock";
  }
  return "?";
}

struct MessageRecord {
  std::int32_t job = 0;
  std::int32_t src_rank = 0;
  std::int32_t dst_rank = 0;
  std::int32_t tag = 0;
  std::uint64_t bytes = 0;
  std::int32_t packets = 0;
  std::int32_t injected = 0;   // tails that left the source NIC
  std::int32_t delivered = 0;  // tails that reached the destination NIC
  std::int64_t value = 0;
  Time post_time = 0;
  Time complete_time = -1;
};

struct RankRecord {
  std::int32_t job = 0;
  std::int32_t rank = 0;
  std::int32_t node = 0;
  Time start_time = 0;
  Time end_time = -1;
  Time comm_time = 0;     // blocked in recv or wait_all
  Time compute_time = 0;
  std::int64_t value = 0;
  std::vector<Time> iteration_marks;
  bool done() const { return end_time >= 0; }
};

// Per router output port (router-router and ejection links).
struct PortStats {
  std::uint64_t bytes = 0;
  std::uint64_t packets = 0;
  Time stall = 0;  // time routed head-of-line packets waited for this port
  std::vector<std::uint64_t> bytes_by_job;
};

struct JobInstance {
  MotifProgram program;
  std::vector<int> node_of_rank;
  std::string label;
};

// Flit-level Dragonfly simulation: input-queued routers with packet-granularity
// credits, virtual cut-through forwarding and round-robin output arbitration.
class Simulation {
 public:
  Simulation(const TopologyConfig& topo_cfg, EngineConfig cfg)
      : topo_(topo_cfg), cfg_(cfg), rng_(mix_seed(cfg.seed, 0x5157)), ctx_{topo_, RouterId{}, rng_, {}, nullptr, cfg.ugal_bias} {
    if (cfg_.flit_bytes == 0 || cfg_.packet_bytes == 0) throw ConfigError("engine: flit and packet sizes must be positive");
    if (cfg_.buffer_packets < 1) throw ConfigError("engine: buffer_packets >= 1 required");
    if (cfg_.local_vcs < 4 || cfg_.global_vcs < 2)
      throw ConfigError("engine: at least 4 local and 2 global VCs are needed for deadlock-free routing");
    if (cfg_.q.alpha <= 0.0 || cfg_.q.alpha > 1.0) throw ConfigError("engine: q alpha must be in (0, 1]");
    if (cfg_.q.epsilon < 0.0 || cfg_.q.epsilon > 1.0) throw ConfigError("engine: q epsilon must be in [0, 1]");
    P_ = topo_.ports_per_router();
    R_ = topo_.num_routers();
    N_ = topo_.num_hosts();
    maxvc_ = std::max(cfg_.local_vcs, cfg_.global_vcs);
    outputs_.resize(static_cast<std::size_t>(R_ * P_ + N_));
    for (int r = 0; r < R_; ++r)
      for (int p = 0; p < P_; ++p) init_output(r * P_ + p, vcs_of(topo_.channel(r, p).kind));
    for (int n = 0; n < N_; ++n) init_output(R_ * P_ + n, 1);
    inputs_.resize(static_cast<std::size_t>(R_ * P_ * maxvc_));
    stats_.resize(static_cast<std::size_t>(R_ * P_));
    nics_.resize(static_cast<std::size_t>(N_));
    nic_resident_.assign(static_cast<std::size_t>(N_), 0);
    round_robin_.assign(static_cast<std::size_t>(R_), 0);
    ctx_.occupancy = [this](const PortId& port) {
      return outputs_[static_cast<std::size_t>(topo_.flat(port.router) * P_ + topo_.port_number(port))].used;
    };
    if (cfg_.routing == Algorithm::qadaptive) {
      const double init = cfg_.q.init_ns >= 0.0 ? cfg_.q.init_ns
                                                 : saturated_minimal_latency_ns(topo_cfg, cfg_.flit_bytes,
                                                                                cfg_.packet_bytes, cfg_.buffer_packets);
      qtables_.assign(static_cast<std::size_t>(R_),
                      QTable(topo_.groups(), topo_.routers_per_group(), P_ - topo_.hosts_per_router(), init));
    }
  }

  const Topology& topology() const { return topo_; }
  const EngineConfig& config() const { return cfg_; }

  // Registers an application; rank r runs on host node_of_rank[r].
  int add_job(MotifProgram program, std::vector<int> node_of_rank, std::string label = {}) {
    if (started_) throw ConfigError("engine: jobs must be added before run()");
    if (static_cast<int>(node_of_rank.size()) != program.ranks || static_cast<int>(program.steps.size()) != program.ranks)
      throw ConfigError("engine: job '" + program.motif + "' has " + std::to_string(program.ranks) + " ranks but " +
                        std::to_string(node_of_rank.size()) + " placed hosts");
    for (int n : node_of_rank)
      if (n < 0 || n >= N_) throw ConfigError("engine: host " + std::to_string(n) + " out of range");
    if (program.ranks >= (1 << 20)) throw ConfigError("engine: too many ranks in one job");
    for (const auto& steps : program.steps)
      for (const auto& s : steps) {
        if (s.kind == StepKind::send && s.bytes == 0) throw ConfigError("engine: zero-byte message in " + program.motif);
        if ((s.kind == StepKind::send || s.kind == StepKind::recv) && (s.peer < 0 || s.peer >= program.ranks))
          throw ConfigError("engine: peer rank out of range in " + program.motif);
        if ((s.kind == StepKind::send || s.kind == StepKind::recv) && (s.tag < 0 || s.tag >= (1 << 22)))
          throw ConfigError("engine: message tag out of range in " + program.motif);
      }
    const int job = static_cast<int>(jobs_.size());
    if (label.empty()) label = program.motif;
    for (int r = 0; r < program.ranks; ++r) {
      RankRecord rec;
      rec.job = job;
      rec.rank = r;
      rec.node = node_of_rank[static_cast<std::size_t>(r)];
      ranks_.push_back(rec);
      rank_state_.push_back({});
    }
    job_first_rank_.push_back(static_cast<int>(ranks_.size()) - program.ranks);
    jobs_.push_back({std::move(program), std::move(node_of_rank), std::move(label)});
    mailboxes_.emplace_back();
    return job;
  }

  // Runs until every job finished and the network drained, or until `end`.
  RunStatus run(Time end = kNever) {
    if (started_) throw ConfigError("engine: run() may only be called once");
    started_ = true;
    for (auto& s : stats_) s.bytes_by_job.assign(jobs_.size(), 0);
    for (std::size_t i = 0; i < ranks_.size(); ++i) advance(static_cast<int>(i));
    schedule({0, 0, EventKind::metric_tick, 0, 0, 0, 0, 0.0}, cfg_.watchdog);
    status_ = RunStatus::completed;
    while (!queue_.empty()) {
      if (queue_.next_time() > end) {
        status_ = RunStatus::time_limit;
        break;
      }
      const Event ev = queue_.pop();
      ++events_;
      if (ev.kind != EventKind::metric_tick) last_event_ = ev.time;
      dispatch(ev);
      if (status_ == RunStatus::deadlock) break;
    }
    end_time_ = status_ == RunStatus::time_limit ? end : (status_ == RunStatus::deadlock ? queue_.now() : last_event_);
    if (status_ == RunStatus::completed) {
      for (const auto& r : ranks_)
        if (!r.done()) {
          status_ = RunStatus::deadlock;
          diagnosis_ = "application stalled: job " + std::to_string(r.job) + " rank " + std::to_string(r.rank) +
                       " never finished (unmatched receive)";
          break;
        }
      if (status_ == RunStatus::completed && cfg_.check_invariants) verify_drained();
      if (status_ == RunStatus::completed) {
        // Trailing credit returns are bookkeeping, not workload time.
        end_time_ = 0;
        for (const auto& r : ranks_) end_time_ = std::max(end_time_, r.end_time);
        for (const auto& p : packets_) end_time_ = std::max(end_time_, p.deliver_time);
      }
    }
    return status_;
  }

  RunStatus status() const { return status_; }
  const std::string& diagnosis() const { return diagnosis_; }
  Time end_time() const { return end_time_; }
  std::uint64_t events_processed() const { return events_; }

  const std::vector<Packet>& packets() const { return packets_; }
  const std::vector<MessageRecord>& messages() const { return messages_; }
  const std::vector<RankRecord>& ranks() const { return ranks_; }
  const std::vector<JobInstance>& jobs() const { return jobs_; }
  const std::vector<QTable>& qtables() const { return qtables_; }
  std::vector<QTable>& qtables() { return qtables_; }
  const PortStats& port_stats(int router, int port) const { return stats_[static_cast<std::size_t>(router * P_ + port)]; }
  std::uint64_t explorations() const { return explorations_; }

  std::vector<RankRecord> job_ranks(int job) const {
    std::vector<RankRecord> out;
    for (const auto& r : ranks_)
      if (r.job == job) out.push_back(r);
    return out;
  }

  // Credits currently available at a router output VC.
  int credits(int router, int port, int vc) const {
    return outputs_[static_cast<std::size_t>(router * P_ + port)].credits[static_cast<std::size_t>(vc)];
  }

  // Credit conservation for every link VC: available credits + packets
  // buffered downstream + packets and credits in flight = buffer capacity.
  void verify_conservation() const {
    for (int o = 0; o < R_ * P_ + N_; ++o) {
      const Output& out = outputs_[static_cast<std::size_t>(o)];
      for (int vc = 0; vc < out.vcs; ++vc) {
        const int resident = downstream_resident(o, vc);
        const int cr = out.credits[static_cast<std::size_t>(vc)];
        DFLYSIM_CHECK(cr >= 0 && cr <= cfg_.buffer_packets, "credit count out of range at output " + std::to_string(o));
        DFLYSIM_CHECK(resident <= cfg_.buffer_packets, "VC buffer overfull downstream of output " + std::to_string(o));
        const int sum = out.credits[static_cast<std::size_t>(vc)] + resident +
                        out.inflight_data[static_cast<std::size_t>(vc)] + out.inflight_credit[static_cast<std::size_t>(vc)];
        DFLYSIM_CHECK(sum == cfg_.buffer_packets, "credit conservation broken at output " + std::to_string(o) + " vc " +
                                                      std::to_string(vc) + ": " + std::to_string(sum));
      }
    }
    for (const auto& st : stats_) {
      std::uint64_t by_job = 0;
      for (auto b : st.bytes_by_job) by_job += b;
      DFLYSIM_CHECK(by_job == st.bytes, "per-job link bytes do not sum to the link total");
    }
  }

 private:
  struct Buffered {
    std::int64_t pkt = 0;
    std::uint16_t arrived = 0;
    std::uint16_t sent = 0;
    Time head_arrival = 0;
    Time ready_since = 0;
    std::int32_t out = -1;  // flat output index once routed
    std::int8_t out_vc = 0;
    std::int8_t out_slot = -1;
    bool granted = false;
    double best_ns = 0.0;
  };
  struct InputVc {
    std::deque<Buffered> q;
  };
  struct Output {
    int vcs = 1;
    std::vector<int> credits;
    std::vector<int> inflight_data;
    std::vector<int> inflight_credit;
    int used = 0;  // sum over VCs of (capacity - credits)
    bool serializing = false;
    int locked_in = -1;            // router output: local input VC id (port * maxvc + vc)
    std::int64_t nic_pkt = -1;     // NIC output: packet being sent
    std::uint16_t nic_sent = 0;
    std::vector<int> requesters;   // local input VC ids with a routed head-of-line packet
    int rr = -1;
  };
  struct Nic {
    std::deque<std::int64_t> queue;
  };
  enum class Block : std::uint8_t { running, compute, recv, wait_all, done };
  struct RankState {
    std::size_t pc = 0;
    Block block = Block::running;
    Time block_start = 0;
    int outstanding = 0;
  };

  int vcs_of(PortKind k) const {
    return k == PortKind::global ? cfg_.global_vcs : (k == PortKind::local ? cfg_.local_vcs : 1);
  }

  void init_output(int o, int vcs) {
    Output& out = outputs_[static_cast<std::size_t>(o)];
    out.vcs = vcs;
    out.credits.assign(static_cast<std::size_t>(vcs), cfg_.buffer_packets);
    out.inflight_data.assign(static_cast<std::size_t>(vcs), 0);
    out.inflight_credit.assign(static_cast<std::size_t>(vcs), 0);
  }

  void schedule(Event ev, Time delay) {
    ev.time = queue_.now() + delay;
    queue_.schedule(ev);
  }

  Time flit_time(const Channel& ch, std::uint32_t bytes) const { return serialization_time(bytes, ch.gbps); }
  std::uint32_t flit_size(const Packet& p, int seq) const {
    return seq + 1 < p.flits ? cfg_.flit_bytes : p.size - cfg_.flit_bytes * static_cast<std::uint32_t>(p.flits - 1);
  }
  const Channel& host_channel(int node) const {
    return topo_.channel(node / topo_.hosts_per_router(), node % topo_.hosts_per_router());
  }

  int downstream_resident(int o, int vc) const {
    if (o >= R_ * P_) {
      const int node = o - R_ * P_;
      const int r = node / topo_.hosts_per_router(), port = node % topo_.hosts_per_router();
      return static_cast<int>(inputs_[static_cast<std::size_t>((r * P_ + port) * maxvc_ + vc)].q.size());
    }
    const Channel& ch = topo_.channel(o / P_, o % P_);
    if (ch.kind == PortKind::host) return nic_resident_[static_cast<std::size_t>(ch.peer_port)];
    if (!ch.connected) return 0;
    return static_cast<int>(inputs_[static_cast<std::size_t>((ch.peer_router * P_ + ch.peer_port) * maxvc_ + vc)].q.size());
  }

  void verify_drained() const {
    verify_conservation();
    for (const auto& o : outputs_)
      for (int vc = 0; vc < o.vcs; ++vc)
        DFLYSIM_CHECK(o.credits[static_cast<std::size_t>(vc)] == cfg_.buffer_packets, "credits not restored after drain");
    for (const auto& p : packets_) DFLYSIM_CHECK(p.deliver_time >= 0, "packet never delivered");
  }

  // --- event dispatch -----------------------------------------------------

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case EventKind::flit_arrival:
        if (ev.b < 0)
          nic_flit_arrival(ev.a, ev.d, ev.c >> 8);
        else
          router_flit_arrival(ev.a, ev.b, ev.c & 0xff, ev.d, ev.c >> 8);
        break;
      case EventKind::serialization_done: {
        const int o = ev.b < 0 ? R_ * P_ + ev.a : ev.a * P_ + ev.b;
        outputs_[static_cast<std::size_t>(o)].serializing = false;
        if (ev.b < 0)
          nic_try_send(ev.a);
        else if (outputs_[static_cast<std::size_t>(o)].locked_in >= 0)
          send_flit(ev.a, ev.b);
        else
          arbitrate(ev.a, ev.b);
        break;
      }
      case EventKind::credit_return: {
        const int o = ev.b < 0 ? R_ * P_ + ev.a : ev.a * P_ + ev.b;
        Output& out = outputs_[static_cast<std::size_t>(o)];
        ++out.credits[static_cast<std::size_t>(ev.c)];
        --out.used;
        --out.inflight_credit[static_cast<std::size_t>(ev.c)];
        DFLYSIM_CHECK(out.credits[static_cast<std::size_t>(ev.c)] <= cfg_.buffer_packets, "credit overflow");
        if (ev.b < 0)
          nic_try_send(ev.a);
        else if (!out.serializing && out.locked_in < 0)
          arbitrate(ev.a, ev.b);
        break;
      }
      case EventKind::motif_step: {
        rank_state_[static_cast<std::size_t>(ev.a)].block = Block::running;
        advance(ev.a);
        break;
      }
      case EventKind::q_feedback: {
        const QKey key{static_cast<QLevel>(ev.c >> 20), ev.c & 0xfffff};
        Feedback fb;
        fb.key = key;
        fb.link_latency_ns = ev.value;  // whole target carried in one field
        qtables_[static_cast<std::size_t>(ev.a)].update(key, ev.b - topo_.hosts_per_router(), fb, cfg_.q.alpha);
        break;
      }
      case EventKind::metric_tick:
        watchdog();
        break;
    }
    if (cfg_.check_invariants && (events_ & 0x3ff) == 0) verify_conservation();
  }

  void watchdog() {
    const std::int64_t in_flight = injected_ - delivered_;
    if ((in_flight > 0 || queued_at_nics_ > 0) && queue_.now() - last_progress_ >= cfg_.watchdog) {
      status_ = RunStatus::deadlock;
      std::ostringstream os;
      os << "no flit moved for " << format_ns(queue_.now() - last_progress_) << " ns with " << in_flight
         << " packets in flight";
      int shown = 0;
      for (int i = 0; i < R_ * P_ * maxvc_ && shown < 4; ++i) {
        const auto& in = inputs_[static_cast<std::size_t>(i)];
        if (in.q.empty()) continue;
        const auto& b = in.q.front();
        os << "; router " << i / maxvc_ / P_ << " in-port " << (i / maxvc_) % P_ << " vc " << i % maxvc_
           << " holds packet " << b.pkt << " -> out " << (b.out >= 0 ? b.out % P_ : -1) << " vc "
           << static_cast<int>(b.out_vc);
        ++shown;
      }
      diagnosis_ = os.str();
      return;
    }
    if (!queue_.empty() || in_flight > 0) schedule({0, 0, EventKind::metric_tick, 0, 0, 0, 0, 0.0}, cfg_.watchdog);
  }

  // --- NIC ------------------------------------------------------------------

  void nic_try_send(int node) {
    Output& o = outputs_[static_cast<std::size_t>(R_ * P_ + node)];
    if (o.serializing) return;
    Nic& nic = nics_[static_cast<std::size_t>(node)];
    if (o.nic_pkt < 0) {
      if (nic.queue.empty() || o.credits[0] == 0) return;
      o.nic_pkt = nic.queue.front();
      nic.queue.pop_front();
      --queued_at_nics_;
      --o.credits[0];
      ++o.used;
      ++o.inflight_data[0];
      o.nic_sent = 0;
      packets_[static_cast<std::size_t>(o.nic_pkt)].inject_time = queue_.now();
      ++injected_;
    }
    Packet& p = packets_[static_cast<std::size_t>(o.nic_pkt)];
    const int seq = o.nic_sent++;
    const Channel& ch = host_channel(node);
    const Time ser = flit_time(ch, flit_size(p, seq));
    o.serializing = true;
    last_progress_ = queue_.now();
    schedule({0, 0, EventKind::serialization_done, node, -1, 0, 0, 0.0}, ser);
    schedule({0, 0, EventKind::flit_arrival, node / topo_.hosts_per_router(), node % topo_.hosts_per_router(), seq << 8,
              p.id, 0.0},
             ser + ch.latency);
    if (seq + 1 == p.flits) {
      o.nic_pkt = -1;
      MessageRecord& m = messages_[static_cast<std::size_t>(p.message)];
      if (++m.injected == m.packets) {
        const int ri = job_first_rank_[static_cast<std::size_t>(m.job)] + m.src_rank;
        RankState& rs = rank_state_[static_cast<std::size_t>(ri)];
        if (--rs.outstanding == 0 && rs.block == Block::wait_all) {
          ranks_[static_cast<std::size_t>(ri)].comm_time += queue_.now() - rs.block_start;
          rs.block = Block::running;
          const auto& steps = jobs_[static_cast<std::size_t>(m.job)].program.steps[static_cast<std::size_t>(m.src_rank)];
          if (rs.pc < steps.size()) ++rs.pc;
          advance(ri);
        }
      }
    }
  }

  void nic_flit_arrival(int node, std::int64_t pid, int seq) {
    Packet& p = packets_[static_cast<std::size_t>(pid)];
    const int r = node / topo_.hosts_per_router();
    const int port = node % topo_.hosts_per_router();
    Output& up = outputs_[static_cast<std::size_t>(r * P_ + port)];
    if (seq == 0) {
      ++nic_resident_[static_cast<std::size_t>(node)];
      --up.inflight_data[0];
    }
    if (seq + 1 < p.flits) return;
    p.deliver_time = queue_.now();
    p.phase = RoutingPhase::Ejected;
    ++delivered_;
    --nic_resident_[static_cast<std::size_t>(node)];
    ++up.inflight_credit[0];
    schedule({0, 0, EventKind::credit_return, r, port, 0, 0, 0.0}, host_channel(node).latency);
    MessageRecord& m = messages_[static_cast<std::size_t>(p.message)];
    if (++m.delivered == m.packets) message_complete(p.message);
  }

  // --- routers --------------------------------------------------------------

  void router_flit_arrival(int r, int port, int vc, std::int64_t pid, int seq) {
    InputVc& in = inputs_[static_cast<std::size_t>((r * P_ + port) * maxvc_ + vc)];
    if (seq == 0) {
      Buffered b;
      b.pkt = pid;
      b.arrived = 1;
      b.head_arrival = queue_.now();
      in.q.push_back(b);
      DFLYSIM_CHECK(static_cast<int>(in.q.size()) <= cfg_.buffer_packets, "input buffer overflow");
      upstream_output(r, port).inflight_data[static_cast<std::size_t>(vc)]--;
      if (in.q.size() == 1) route_head(r, port, vc);
      return;
    }
    Buffered& b = in.q.back();
    DFLYSIM_CHECK(b.pkt == pid, "flits of different packets interleaved on one VC");
    ++b.arrived;
    const Buffered& f = in.q.front();
    if (f.pkt == pid && f.granted && !outputs_[static_cast<std::size_t>(f.out)].serializing)
      send_flit(r, f.out % P_);
  }

  Output& upstream_output(int r, int port) {
    if (port < topo_.hosts_per_router())
      return outputs_[static_cast<std::size_t>(R_ * P_ + r * topo_.hosts_per_router() + port)];
    const Channel& ch = topo_.channel(r, port);
    return outputs_[static_cast<std::size_t>(ch.peer_router * P_ + ch.peer_port)];
  }

  void route_head(int r, int in_port, int in_vc) {
    InputVc& in = inputs_[static_cast<std::size_t>((r * P_ + in_port) * maxvc_ + in_vc)];
    Buffered& b = in.q.front();
    Packet& p = packets_[static_cast<std::size_t>(b.pkt)];
    ctx_.here = topo_.router(r);
    ctx_.round_robin = &round_robin_[static_cast<std::size_t>(r)];
    PortId port;
    switch (cfg_.routing) {
      case Algorithm::min: port = route_min(p, ctx_); break;
      case Algorithm::ugalg: port = route_ugalg(p, ctx_); break;
      case Algorithm::ugaln: port = route_ugaln(p, ctx_); break;
      case Algorithm::par: port = route_par(p, ctx_); break;
      case Algorithm::qadaptive: {
        const QRouteResult res = q_route(p, ctx_, qtables_[static_cast<std::size_t>(r)], cfg_.q);
        port = res.port;
        b.best_ns = res.best_estimate_ns;
        explorations_ += res.explored;
        break;
      }
    }
    const int port_no = topo_.port_number(port);
    int vc = 0;
    if (port.kind != PortKind::host) {
      const VcSlot slot = next_vc_slot(p.vc_slot, port.kind);
      vc = slot.vc;
      b.out_slot = static_cast<std::int8_t>(slot.slot);
      if (vc < 0 || vc >= vcs_of(port.kind))
        throw InvariantError("packet " + std::to_string(p.id) + " has no " + to_string(port.kind) +
                             " VC left (route so far " + std::to_string(p.local_hops) + " local, " +
                             std::to_string(p.global_hops) + " global hops)");
    }
    DFLYSIM_CHECK(port.kind == PortKind::host || topo_.channel(r, port_no).connected, "routed onto unconnected port");
    b.out = r * P_ + port_no;
    b.out_vc = static_cast<std::int8_t>(vc);
    b.ready_since = queue_.now();
    Output& o = outputs_[static_cast<std::size_t>(b.out)];
    o.requesters.push_back(in_port * maxvc_ + in_vc);
    if (!o.serializing && o.locked_in < 0) arbitrate(r, port_no);
  }

  void arbitrate(int r, int port) {
    Output& o = outputs_[static_cast<std::size_t>(r * P_ + port)];
    if (o.serializing || o.locked_in >= 0 || o.requesters.empty()) return;
    const int span = P_ * maxvc_;
    std::size_t pick = o.requesters.size();
    int best = span + 1;
    for (std::size_t i = 0; i < o.requesters.size(); ++i) {
      const int id = o.requesters[i];
      const Buffered& b = inputs_[static_cast<std::size_t>(r * P_ * maxvc_ + id)].q.front();
      if (o.credits[static_cast<std::size_t>(b.out_vc)] == 0) continue;
      const int dist = ((id - o.rr - 1) % span + span) % span;
      if (dist < best) {
        best = dist;
        pick = i;
      }
    }
    if (pick == o.requesters.size()) return;
    const int id = o.requesters[pick];
    o.requesters.erase(o.requesters.begin() + static_cast<std::ptrdiff_t>(pick));
    o.rr = id;
    o.locked_in = id;
    const int in_port = id / maxvc_;
    Buffered& b = inputs_[static_cast<std::size_t>(r * P_ * maxvc_ + id)].q.front();
    b.granted = true;
    --o.credits[static_cast<std::size_t>(b.out_vc)];
    ++o.used;
    ++o.inflight_data[static_cast<std::size_t>(b.out_vc)];
    PortStats& st = stats_[static_cast<std::size_t>(r * P_ + port)];
    st.stall += queue_.now() - b.ready_since;
    ++st.packets;

    Packet& p = packets_[static_cast<std::size_t>(b.pkt)];
    const PortKind kind = topo_.channel(r, port).kind;
    if (kind != PortKind::host) {
      if (cfg_.record_hops) p.hops.push_back({r, queue_.now(), kind, b.out_vc, b.out_slot});
      p.vc_slot = b.out_slot;
      if (kind == PortKind::local)
        ++p.local_hops;
      else
        ++p.global_hops;
    }
    p.vc = b.out_vc;
    if (cfg_.routing == Algorithm::qadaptive && in_port >= topo_.hosts_per_router()) send_feedback(r, in_port, b, p);
    send_flit(r, port);
  }

  // Reports this router's delay and best estimate back to the upstream router.
  void send_feedback(int r, int in_port, const Buffered& b, const Packet& p) {
    const Channel& back = topo_.channel(r, in_port);
    const RouterId here = topo_.router(r);
    const RouterId up = topo_.router(back.peer_router);
    const RouterId dst = topo_.node(p.dst_node).router;
    const QKey key = q_key(up, dst);
    double best = b.best_ns;
    if (here == dst || (key.level == QLevel::group && here.group == dst.group)) best = 0.0;
    const double link = to_ns(back.latency + flit_time(back, cfg_.flit_bytes));
    const double target = link + to_ns(queue_.now() - b.head_arrival) + best;
    schedule({0, 0, EventKind::q_feedback, back.peer_router, back.peer_port,
              (static_cast<int>(key.level) << 20) | key.dest, 0, target},
             back.latency);
  }

  void send_flit(int r, int port) {
    Output& o = outputs_[static_cast<std::size_t>(r * P_ + port)];
    const int id = o.locked_in;
    InputVc& in = inputs_[static_cast<std::size_t>(r * P_ * maxvc_ + id)];
    Buffered& b = in.q.front();
    if (b.sent >= b.arrived) return;  // wait for the next flit
    Packet& p = packets_[static_cast<std::size_t>(b.pkt)];
    const int seq = b.sent++;
    const std::uint32_t bytes = flit_size(p, seq);
    const Channel& ch = topo_.channel(r, port);
    const Time ser = flit_time(ch, bytes);
    o.serializing = true;
    last_progress_ = queue_.now();
    PortStats& st = stats_[static_cast<std::size_t>(r * P_ + port)];
    st.bytes += bytes;
    st.bytes_by_job[static_cast<std::size_t>(p.job)] += bytes;
    schedule({0, 0, EventKind::serialization_done, r, port, 0, 0, 0.0}, ser);
    if (ch.kind == PortKind::host)
      schedule({0, 0, EventKind::flit_arrival, ch.peer_port, -1, seq << 8, p.id, 0.0}, ser + ch.latency);
    else
      schedule({0, 0, EventKind::flit_arrival, ch.peer_router, ch.peer_port, (seq << 8) | b.out_vc, p.id, 0.0},
               ser + ch.latency);
    if (seq + 1 < p.flits) return;

    // Tail left: free the output, release the input slot and return its credit.
    o.locked_in = -1;
    const int in_port = id / maxvc_;
    const int in_vc = id % maxvc_;
    in.q.pop_front();
    Output& up = upstream_output(r, in_port);
    ++up.inflight_credit[static_cast<std::size_t>(in_vc)];
    if (in_port < topo_.hosts_per_router()) {
      const int node = r * topo_.hosts_per_router() + in_port;
      schedule({0, 0, EventKind::credit_return, node, -1, 0, 0, 0.0}, host_channel(node).latency);
    } else {
      const Channel& back = topo_.channel(r, in_port);
      schedule({0, 0, EventKind::credit_return, back.peer_router, back.peer_port, in_vc, 0, 0.0}, back.latency);
    }
    if (!in.q.empty()) route_head(r, in_port, in_vc);
  }

  // --- applications -----------------------------------------------------------

  static std::uint64_t mailbox_key(int src, int tag) {
    return (static_cast<std::uint64_t>(src) << 22) | static_cast<std::uint64_t>(tag);
  }

  void post_message(int ri, const Step& s) {
    RankRecord& rec = ranks_[static_cast<std::size_t>(ri)];
    const JobInstance& job = jobs_[static_cast<std::size_t>(rec.job)];
    MessageRecord m;
    m.job = rec.job;
    m.src_rank = rec.rank;
    m.dst_rank = s.peer;
    m.tag = s.tag;
    m.bytes = s.bytes;
    m.value = rec.value;
    m.post_time = queue_.now();
    m.packets = static_cast<std::int32_t>((s.bytes + cfg_.packet_bytes - 1) / cfg_.packet_bytes);
    const std::int64_t mid = static_cast<std::int64_t>(messages_.size());
    messages_.push_back(m);
    const int src_node = rec.node;
    const int dst_node = job.node_of_rank[static_cast<std::size_t>(s.peer)];
    Nic& nic = nics_[static_cast<std::size_t>(src_node)];
    std::uint64_t left = s.bytes;
    while (left > 0) {
      Packet p;
      p.id = static_cast<std::int64_t>(packets_.size());
      p.job = rec.job;
      p.src_node = src_node;
      p.dst_node = dst_node;
      p.size = static_cast<std::uint32_t>(std::min<std::uint64_t>(left, cfg_.packet_bytes));
      p.flits = flits_for(p.size, cfg_.flit_bytes);
      p.message = mid;
      left -= p.size;
      nic.queue.push_back(p.id);
      ++queued_at_nics_;
      packets_.push_back(std::move(p));
    }
    ++rank_state_[static_cast<std::size_t>(ri)].outstanding;
    nic_try_send(src_node);
  }

  bool try_receive(int ri, const Step& s) {
    RankRecord& rec = ranks_[static_cast<std::size_t>(ri)];
    auto& box = mailboxes_[static_cast<std::size_t>(rec.job)][static_cast<std::size_t>(rec.rank)];
    auto it = box.find(mailbox_key(s.peer, s.tag));
    if (it == box.end() || it->second.empty()) return false;
    const MessageRecord& m = messages_[static_cast<std::size_t>(it->second.front())];
    it->second.pop_front();
    if (s.op == ReduceOp::accumulate) rec.value += m.value;
    if (s.op == ReduceOp::assign) rec.value = m.value;
    return true;
  }

  void message_complete(std::int64_t mid) {
    MessageRecord& m = messages_[static_cast<std::size_t>(mid)];
    m.complete_time = queue_.now();
    auto& boxes = mailboxes_[static_cast<std::size_t>(m.job)];
    if (boxes.empty()) boxes.resize(static_cast<std::size_t>(jobs_[static_cast<std::size_t>(m.job)].program.ranks));
    boxes[static_cast<std::size_t>(m.dst_rank)][mailbox_key(m.src_rank, m.tag)].push_back(mid);
    const int ri = job_first_rank_[static_cast<std::size_t>(m.job)] + m.dst_rank;
    RankState& rs = rank_state_[static_cast<std::size_t>(ri)];
    if (rs.block != Block::recv) return;
    const Step& s = jobs_[static_cast<std::size_t>(m.job)].program.steps[static_cast<std::size_t>(m.dst_rank)][rs.pc];
    if (s.peer != m.src_rank || s.tag != m.tag) return;
    try_receive(ri, s);
    ranks_[static_cast<std::size_t>(ri)].comm_time += queue_.now() - rs.block_start;
    rs.block = Block::running;
    ++rs.pc;
    advance(ri);
  }

  void advance(int ri) {
    RankRecord& rec = ranks_[static_cast<std::size_t>(ri)];
    RankState& rs = rank_state_[static_cast<std::size_t>(ri)];
    const auto& steps = jobs_[static_cast<std::size_t>(rec.job)].program.steps[static_cast<std::size_t>(rec.rank)];
    auto& boxes = mailboxes_[static_cast<std::size_t>(rec.job)];
    if (boxes.empty()) boxes.resize(static_cast<std::size_t>(jobs_[static_cast<std::size_t>(rec.job)].program.ranks));
    while (true) {
      if (rs.pc >= steps.size()) {
        if (rs.outstanding > 0) {
          rs.block = Block::wait_all;
          rs.block_start = queue_.now();
          return;
        }
        rs.block = Block::done;
        rec.end_time = queue_.now();
        return;
      }
      const Step& s = steps[rs.pc];
      switch (s.kind) {
        case StepKind::compute:
          ++rs.pc;
          if (s.duration <= 0) break;
          rec.compute_time += s.duration;
          rs.block = Block::compute;
          schedule({0, 0, EventKind::motif_step, ri, 0, 0, 0, 0.0}, s.duration);
          return;
        case StepKind::send:
          ++rs.pc;
          post_message(ri, s);
          break;
        case StepKind::recv:
          if (!try_receive(ri, s)) {
            rs.block = Block::recv;
            rs.block_start = queue_.now();
            return;
          }
          ++rs.pc;
          break;
        case StepKind::wait_all:
          if (rs.outstanding > 0) {
            rs.block = Block::wait_all;
            rs.block_start = queue_.now();
            return;
          }
          ++rs.pc;
          break;
        case StepKind::mark:
          rec.iteration_marks.push_back(queue_.now());
          ++rs.pc;
          break;
      }
    }
  }

  Topology topo_;
  EngineConfig cfg_;
  Rng rng_;
  RouteContext ctx_;
  EventQueue queue_;
  int P_ = 0, R_ = 0, N_ = 0, maxvc_ = 4;

  std::vector<Output> outputs_;  // router ports, then one injection output per NIC
  std::vector<InputVc> inputs_;
  std::vector<PortStats> stats_;
  std::vector<Nic> nics_;
  std::vector<int> nic_resident_;
  std::vector<std::size_t> round_robin_;
  std::vector<QTable> qtables_;

  std::vector<Packet> packets_;
  std::vector<MessageRecord> messages_;
  std::vector<JobInstance> jobs_;
  std::vector<RankRecord> ranks_;
  std::vector<RankState> rank_state_;
  std::vector<int> job_first_rank_;
  std::vector<std::vector<std::unordered_map<std::uint64_t, std::deque<std::int64_t>>>> mailboxes_;

  bool started_ = false;
  RunStatus status_ = RunStatus::completed;
  std::string diagnosis_;
  Time end_time_ = 0;
  Time last_progress_ = 0;
  Time last_event_ = 0;
  std::uint64_t events_ = 0;
  std::uint64_t explorations_ = 0;
  std::int64_t injected_ = 0;
  std::int64_t delivered_ = 0;
  std::int64_t queued_at_nics_ = 0;
};

}  // namespace dflysim
