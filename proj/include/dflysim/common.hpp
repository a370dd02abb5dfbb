#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace dflysim {

// Simulation clock in integer picoseconds. A 128 B flit on a 200 Gb/s link
// takes 5.12 ns, so nanoseconds are too coarse.
using Time = std::int64_t;

inline constexpr Time kPsPerNs = 1000;
inline constexpr Time kNever = std::numeric_limits<Time>::max();

constexpr Time from_ns(double ns) { return static_cast<Time>(ns * kPsPerNs + (ns >= 0 ? 0.5 : -0.5)); }
constexpr double to_ns(Time t) { return static_cast<double>(t) / kPsPerNs; }

// Exact decimal rendering of a picosecond time in nanoseconds ("120.720").
inline std::string format_ns(Time t) {
  const bool neg = t < 0;
  const std::uint64_t v = neg ? static_cast<std::uint64_t>(-t) : static_cast<std::uint64_t>(t);
  std::string frac = std::to_string(v % 1000);
  frac.insert(0, 3 - frac.size(), '0');
  return (neg ? "-" : "") + std::to_string(v / 1000) + "." + frac;
}

// Serialization time of `bytes` on a link of `gbps` gigabits per second.
inline Time serialization_time(std::uint64_t bytes, double gbps) {
  return static_cast<Time>(static_cast<double>(bytes) * 8.0 * 1000.0 / gbps + 0.5);
}

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

#define DFLYSIM_CHECK(cond, msg)                                                  \
  do {                                                                            \
    if (!(cond)) throw ::dflysim::InvariantError(std::string("invariant: ") + msg); \
  } while (0)

// Deterministic RNG. Bounded draws avoid std distributions so streams are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; derives independent sub-seeds from (seed, salt).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dflysim
