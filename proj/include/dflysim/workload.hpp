#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "dflysim/common.hpp"

namespace dflysim {

enum class StepKind : std::uint8_t { compute, send, recv, wait_all, mark };

// How a completed receive combines the message payload into the rank's value.
enum class ReduceOp : std::uint8_t { none, accumulate, assign };

struct Step {
  StepKind kind = StepKind::compute;
  std::int32_t peer = -1;
  std::uint64_t bytes = 0;
  std::int32_t tag = 0;
  Time duration = 0;
  ReduceOp op = ReduceOp::none;

  static Step compute(Time d) { return {StepKind::compute, -1, 0, 0, d, ReduceOp::none}; }
  static Step send(int dst, std::uint64_t bytes, int tag) { return {StepKind::send, dst, bytes, tag, 0, ReduceOp::none}; }
  static Step recv(int src, int tag, ReduceOp op = ReduceOp::none) { return {StepKind::recv, src, 0, tag, 0, op}; }
  static Step wait_all() { return {StepKind::wait_all, -1, 0, 0, 0, ReduceOp::none}; }
  static Step mark() { return {StepKind::mark, -1, 0, 0, 0, ReduceOp::none}; }
};

using StepList = std::vector<Step>;

// Per-rank step lists of one application.
struct MotifProgram {
  std::string motif;
  int ranks = 0;
  int iterations = 1;
  std::vector<StepList> steps;

  std::uint64_t total_send_bytes() const {
    std::uint64_t t = 0;
    for (const auto& s : steps)
      for (const auto& st : s)
        if (st.kind == StepKind::send) t += st.bytes;
    return t;
  }
  std::size_t message_count() const {
    std::size_t n = 0;
    for (const auto& s : steps)
      for (const auto& st : s) n += st.kind == StepKind::send;
    return n;
  }
};

class WorkloadError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

namespace detail {

inline MotifProgram empty_program(std::string name, int ranks, int iterations) {
  MotifProgram p;
  p.motif = std::move(name);
  p.ranks = ranks;
  p.iterations = iterations;
  p.steps.assign(static_cast<std::size_t>(ranks), {});
  return p;
}

inline int integer_root(int n, int k) {
  int r = static_cast<int>(std::lround(std::pow(static_cast<double>(n), 1.0 / k)));
  for (int c = std::max(1, r - 1); c <= r + 1; ++c) {
    long long v = 1;
    for (int i = 0; i < k; ++i) v *= c;
    if (v == n) return c;
  }
  return -1;
}

}  // namespace detail

// Factor `n` into `k` extents as evenly as possible (largest first).
inline std::vector<int> balanced_dims(int n, int k) {
  std::vector<int> dims(static_cast<std::size_t>(k), 1);
  std::vector<int> primes;
  for (int m = n, f = 2; m > 1;) {
    if (m % f == 0) {
      primes.push_back(f);
      m /= f;
    } else {
      ++f;
    }
  }
  std::sort(primes.rbegin(), primes.rend());
  for (int f : primes) *std::min_element(dims.begin(), dims.end()) *= f;
  std::sort(dims.rbegin(), dims.rend());
  return dims;
}

// Uniform random traffic: every iteration each rank sends one message to a
// uniformly chosen other rank, receives what was sent to it, then waits.
inline MotifProgram motif_ur(int ranks, std::uint64_t msg_bytes, int count, Rng& rng, Time compute = 0) {
  if (ranks < 2) throw WorkloadError("ur: ranks >= 2 required");
  if (msg_bytes == 0) throw WorkloadError("ur: message size must be >= 1 byte");
  auto p = detail::empty_program("ur", ranks, count);
  std::vector<int> target(static_cast<std::size_t>(ranks));
  for (int it = 0; it < count; ++it) {
    for (int r = 0; r < ranks; ++r) {
      int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(ranks - 1)));
      target[static_cast<std::size_t>(r)] = t >= r ? t + 1 : t;
    }
    for (int r = 0; r < ranks; ++r) {
      auto& s = p.steps[static_cast<std::size_t>(r)];
      s.push_back(Step::mark());
      if (compute > 0) s.push_back(Step::compute(compute));
      s.push_back(Step::send(target[static_cast<std::size_t>(r)], msg_bytes, it));
    }
    for (int r = 0; r < ranks; ++r)
      p.steps[static_cast<std::size_t>(target[static_cast<std::size_t>(r)])].push_back(Step::recv(r, it));
    for (int r = 0; r < ranks; ++r) p.steps[static_cast<std::size_t>(r)].push_back(Step::wait_all());
  }
  return p;
}

// Fixed permutation: rank r streams `count` messages to dest[r] without
// blocking. Used for adversarial group-shift traffic.
inline MotifProgram motif_permutation(const std::vector<int>& dest, std::uint64_t msg_bytes, int count) {
  const int ranks = static_cast<int>(dest.size());
  auto p = detail::empty_program("permutation", ranks, count);
  std::vector<std::vector<int>> sources(static_cast<std::size_t>(ranks));
  for (int r = 0; r < ranks; ++r) {
    if (dest[static_cast<std::size_t>(r)] < 0 || dest[static_cast<std::size_t>(r)] >= ranks)
      throw WorkloadError("permutation: destination out of range");
    sources[static_cast<std::size_t>(dest[static_cast<std::size_t>(r)])].push_back(r);
  }
  for (int r = 0; r < ranks; ++r) {
    auto& s = p.steps[static_cast<std::size_t>(r)];
    for (int i = 0; i < count; ++i) s.push_back(Step::send(dest[static_cast<std::size_t>(r)], msg_bytes, 0));
    for (int src : sources[static_cast<std::size_t>(r)])
      for (int i = 0; i < count; ++i) s.push_back(Step::recv(src, 0));
  }
  return p;
}

// LU-style 2-D wavefront: receive from up/left, send to down/right.
inline MotifProgram motif_sweep_lu(int ranks, std::uint64_t msg_bytes, int iterations, Time compute = 0) {
  const int n = detail::integer_root(ranks, 2);
  if (n < 1) throw WorkloadError("lu: rank count " + std::to_string(ranks) + " is not a perfect square");
  auto p = detail::empty_program("lu", ranks, iterations);
  for (int it = 0; it < iterations; ++it)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        auto& s = p.steps[static_cast<std::size_t>(i * n + j)];
        s.push_back(Step::mark());
        if (i > 0) s.push_back(Step::recv((i - 1) * n + j, it));
        if (j > 0) s.push_back(Step::recv(i * n + j - 1, it));
        if (compute > 0) s.push_back(Step::compute(compute));
        if (i + 1 < n) s.push_back(Step::send((i + 1) * n + j, msg_bytes, it));
        if (j + 1 < n) s.push_back(Step::send(i * n + j + 1, msg_bytes, it));
      }
  return p;
}

// Ring alltoall over `members` (global rank ids): in round i member N sends to
// N+i and receives from N-i. Appends to each member's step list; tags are
// tag_base + round.
inline void motif_alltoall_ring(MotifProgram& prog, const std::vector<int>& members, std::uint64_t msg_bytes,
                                int tag_base) {
  const int P = static_cast<int>(members.size());
  for (int n = 0; n < P; ++n) {
    auto& s = prog.steps[static_cast<std::size_t>(members[static_cast<std::size_t>(n)])];
    for (int i = 1; i < P; ++i) {
      s.push_back(Step::send(members[static_cast<std::size_t>((n + i) % P)], msg_bytes, tag_base + i));
      s.push_back(Step::recv(members[static_cast<std::size_t>((n - i + P) % P)], tag_base + i));
    }
  }
}

// Standalone alltoall program over all ranks.
inline MotifProgram motif_alltoall(int ranks, std::uint64_t msg_bytes, int iterations = 1) {
  if (ranks < 2) throw WorkloadError("alltoall: communicator size >= 2 required");
  auto p = detail::empty_program("alltoall", ranks, iterations);
  std::vector<int> all(static_cast<std::size_t>(ranks));
  std::iota(all.begin(), all.end(), 0);
  for (int it = 0; it < iterations; ++it) motif_alltoall_ring(p, all, msg_bytes, it * ranks);
  return p;
}

// FFT3D: ranks form a rows x cols array; each half-iteration computes, then
// runs an alltoall along rows and one along columns.
inline MotifProgram motif_fft3d(int ranks, std::uint64_t msg_bytes, int iterations, Time compute = 0) {
  if (ranks < 2) throw WorkloadError("fft3d: ranks >= 2 required");
  const auto dims = balanced_dims(ranks, 2);
  const int rows = dims[1], cols = dims[0];
  auto p = detail::empty_program("fft3d", ranks, iterations);
  const int stride = std::max(rows, cols) + 1;
  int tag = 0;
  for (int it = 0; it < iterations; ++it) {
    for (int r = 0; r < ranks; ++r) p.steps[static_cast<std::size_t>(r)].push_back(Step::mark());
    for (int half = 0; half < 2; ++half) {
      if (compute > 0)
        for (int r = 0; r < ranks; ++r) p.steps[static_cast<std::size_t>(r)].push_back(Step::compute(compute));
      for (int pass = 0; pass < 2; ++pass) {
        const bool by_row = (pass == 0) == (half == 0);
        const int groups = by_row ? rows : cols;
        for (int gi = 0; gi < groups; ++gi) {
          std::vector<int> members;
          if (by_row)
            for (int c = 0; c < cols; ++c) members.push_back(gi * cols + c);
          else
            for (int rr = 0; rr < rows; ++rr) members.push_back(rr * cols + gi);
          if (members.size() >= 2) motif_alltoall_ring(p, members, msg_bytes, tag);
        }
        tag += stride;
      }
    }
  }
  return p;
}

// Neighbors of a rank in a non-periodic grid (row-major, last extent fastest).
inline std::vector<int> grid_neighbors(int rank, const std::vector<int>& dims, bool diagonals = false) {
  const int k = static_cast<int>(dims.size());
  std::vector<int> coord(static_cast<std::size_t>(k));
  for (int d = k - 1, r = rank; d >= 0; --d) {
    coord[static_cast<std::size_t>(d)] = r % dims[static_cast<std::size_t>(d)];
    r /= dims[static_cast<std::size_t>(d)];
  }
  auto flat = [&](const std::vector<int>& c) {
    int f = 0;
    for (int d = 0; d < k; ++d) f = f * dims[static_cast<std::size_t>(d)] + c[static_cast<std::size_t>(d)];
    return f;
  };
  std::vector<int> out;
  if (!diagonals) {
    for (int d = 0; d < k; ++d)
      for (int delta : {-1, 1}) {
        auto c = coord;
        c[static_cast<std::size_t>(d)] += delta;
        if (c[static_cast<std::size_t>(d)] >= 0 && c[static_cast<std::size_t>(d)] < dims[static_cast<std::size_t>(d)])
          out.push_back(flat(c));
      }
    return out;
  }
  int combos = 1;
  for (int d = 0; d < k; ++d) combos *= 3;
  for (int m = 0; m < combos; ++m) {
    auto c = coord;
    bool self = true, inside = true;
    for (int d = 0, mm = m; d < k; ++d, mm /= 3) {
      const int delta = mm % 3 - 1;
      self = self && delta == 0;
      c[static_cast<std::size_t>(d)] += delta;
      inside = inside && c[static_cast<std::size_t>(d)] >= 0 && c[static_cast<std::size_t>(d)] < dims[static_cast<std::size_t>(d)];
    }
    if (!self && inside) out.push_back(flat(c));
  }
  return out;
}

// Nearest-neighbor exchange on a non-periodic grid: post all sends, receive
// from every neighbor, wait. Halo3D (3-D), LQCD (4-D), Stencil5D (5-D).
inline MotifProgram motif_stencil(const std::vector<int>& dims, std::uint64_t msg_bytes, int iterations,
                                  Time compute = 0, std::string name = "stencil") {
  if (dims.empty()) throw WorkloadError("stencil: at least one dimension required");
  int ranks = 1;
  for (int d : dims) {
    if (d < 1) throw WorkloadError("stencil: extents must be positive");
    ranks *= d;
  }
  auto p = detail::empty_program(std::move(name), ranks, iterations);
  for (int it = 0; it < iterations; ++it)
    for (int r = 0; r < ranks; ++r) {
      auto& s = p.steps[static_cast<std::size_t>(r)];
      const auto nb = grid_neighbors(r, dims);
      s.push_back(Step::mark());
      if (compute > 0) s.push_back(Step::compute(compute));
      for (int n : nb) s.push_back(Step::send(n, msg_bytes, it));
      for (int n : nb) s.push_back(Step::recv(n, it));
      s.push_back(Step::wait_all());
    }
  return p;
}

inline MotifProgram motif_stencil(int ranks, const std::vector<int>& dims, std::uint64_t msg_bytes, int iterations,
                                  Time compute = 0, std::string name = "stencil") {
  int prod = 1;
  for (int d : dims) prod *= d;
  if (prod != ranks)
    throw WorkloadError("stencil: extents multiply to " + std::to_string(prod) + ", not " + std::to_string(ranks) +
                        " ranks");
  return motif_stencil(dims, msg_bytes, iterations, compute, std::move(name));
}

// Binary-tree allreduce: every round computes for `interval`, reduces leaf to
// root (children 2i+1, 2i+2) and broadcasts back down.
inline MotifProgram motif_allreduce(int ranks, std::uint64_t msg_bytes, Time interval, int rounds,
                                    std::string name = "allreduce") {
  if (ranks < 1) throw WorkloadError("allreduce: ranks >= 1 required");
  auto p = detail::empty_program(std::move(name), ranks, rounds);
  for (int rd = 0; rd < rounds; ++rd)
    for (int i = 0; i < ranks; ++i) {
      auto& s = p.steps[static_cast<std::size_t>(i)];
      s.push_back(Step::mark());
      if (interval > 0) s.push_back(Step::compute(interval));
      const int kids[2] = {2 * i + 1, 2 * i + 2};
      for (int c : kids)
        if (c < ranks) s.push_back(Step::recv(c, 2 * rd, ReduceOp::accumulate));
      if (i > 0) {
        s.push_back(Step::send((i - 1) / 2, msg_bytes, 2 * rd));
        s.push_back(Step::recv((i - 1) / 2, 2 * rd + 1, ReduceOp::assign));
      }
      for (int c : kids)
        if (c < ranks) s.push_back(Step::send(c, msg_bytes, 2 * rd + 1));
    }
  return p;
}

// LULESH skeleton: 26-point 3-D stencil exchange followed by a 3-D wavefront
// sweep from corner (0,0,0).
inline MotifProgram motif_lulesh(int ranks, std::uint64_t stencil_bytes, std::uint64_t sweep_bytes, int iterations,
                                 Time compute = 0) {
  const int n = detail::integer_root(ranks, 3);
  if (n < 1) throw WorkloadError("lulesh: rank count " + std::to_string(ranks) + " is not a perfect cube");
  const std::vector<int> dims{n, n, n};
  auto p = detail::empty_program("lulesh", ranks, iterations);
  for (int it = 0; it < iterations; ++it)
    for (int r = 0; r < ranks; ++r) {
      auto& s = p.steps[static_cast<std::size_t>(r)];
      s.push_back(Step::mark());
      if (compute > 0) s.push_back(Step::compute(compute));
      const auto nb = grid_neighbors(r, dims, true);
      for (int m : nb) s.push_back(Step::send(m, stencil_bytes, 2 * it));
      for (int m : nb) s.push_back(Step::recv(m, 2 * it));
      s.push_back(Step::wait_all());
      const int x = r / (n * n), y = (r / n) % n, z = r % n;
      if (x > 0) s.push_back(Step::recv(r - n * n, 2 * it + 1));
      if (y > 0) s.push_back(Step::recv(r - n, 2 * it + 1));
      if (z > 0) s.push_back(Step::recv(r - 1, 2 * it + 1));
      if (x + 1 < n) s.push_back(Step::send(r + n * n, sweep_bytes, 2 * it + 1));
      if (y + 1 < n) s.push_back(Step::send(r + n, sweep_bytes, 2 * it + 1));
      if (z + 1 < n) s.push_back(Step::send(r + 1, sweep_bytes, 2 * it + 1));
    }
  return p;
}

// Result of running a program without a network: messages arrive instantly.
struct DataflowResult {
  bool completed = false;
  std::vector<std::int64_t> values;
  int stages = 0;  // longest chain of dependent messages, counted in ranks visited
  std::size_t sends = 0;
  std::size_t receives = 0;
  std::map<std::pair<int, int>, int> message_matrix;  // (src, dst) -> count
};

// Executes a program by message passing without timing. Each rank starts
// with `initial[r]`; receives combine payloads per their ReduceOp.
inline DataflowResult dataflow_execute(const MotifProgram& prog, std::vector<std::int64_t> initial = {}) {
  const int n = prog.ranks;
  DataflowResult res;
  res.values = initial.empty() ? std::vector<std::int64_t>(static_cast<std::size_t>(n), 0) : std::move(initial);
  std::vector<std::size_t> pc(static_cast<std::size_t>(n), 0);
  std::vector<int> stage(static_cast<std::size_t>(n), 1);
  struct Msg {
    std::int64_t value;
    int stage;
  };
  std::map<std::tuple<int, int, int>, std::deque<Msg>> mailbox;  // (dst, src, tag)
  bool progress = true;
  while (progress) {
    progress = false;
    for (int r = 0; r < n; ++r) {
      const auto& steps = prog.steps[static_cast<std::size_t>(r)];
      auto& i = pc[static_cast<std::size_t>(r)];
      while (i < steps.size()) {
        const Step& s = steps[i];
        if (s.kind == StepKind::send) {
          mailbox[{s.peer, r, s.tag}].push_back({res.values[static_cast<std::size_t>(r)], stage[static_cast<std::size_t>(r)]});
          ++res.message_matrix[{r, s.peer}];
          ++res.sends;
        } else if (s.kind == StepKind::recv) {
          auto it = mailbox.find({r, s.peer, s.tag});
          if (it == mailbox.end() || it->second.empty()) break;
          const Msg m = it->second.front();
          it->second.pop_front();
          auto& v = res.values[static_cast<std::size_t>(r)];
          if (s.op == ReduceOp::accumulate) v += m.value;
          if (s.op == ReduceOp::assign) v = m.value;
          stage[static_cast<std::size_t>(r)] = std::max(stage[static_cast<std::size_t>(r)], m.stage + 1);
          ++res.receives;
        }
        ++i;
        progress = true;
      }
    }
  }
  res.completed = true;
  for (int r = 0; r < n; ++r) res.completed = res.completed && pc[static_cast<std::size_t>(r)] == prog.steps[static_cast<std::size_t>(r)].size();
  res.stages = *std::max_element(stage.begin(), stage.end());
  return res;
}

}  // namespace dflysim
