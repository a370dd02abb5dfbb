#pragma once

#include <cstdint>
#include <queue>
#include <vector>

#include "dflysim/common.hpp"

namespace dflysim {

enum class EventKind : std::uint8_t {
  flit_arrival,
  credit_return,
  serialization_done,
  motif_step,
  metric_tick,
  q_feedback,
};

// Small POD event; the meaning of the payload fields depends on `kind`.
struct Event {
  Time time = 0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::metric_tick;
  std::int32_t a = 0;
  std::int32_t b = 0;
  std::int32_t c = 0;
  std::int64_t d = 0;
  double value = 0.0;
};

// Pending events processed in (time, sequence) order. Sequence numbers are
// assigned at schedule time, so equal-time events pop in schedule order.
class EventQueue {
 public:
  Time now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::uint64_t scheduled() const { return next_seq_; }

  void schedule(Event ev) {
    if (ev.time < now_)
      throw InvariantError("event scheduled in the past: t=" + std::to_string(ev.time) +
                           " now=" + std::to_string(now_));
    ev.sequence = next_seq_++;
    heap_.push(ev);
  }

  Time next_time() const { return heap_.empty() ? kNever : heap_.top().time; }

  Event pop() {
    Event ev = heap_.top();
    heap_.pop();
    DFLYSIM_CHECK(ev.time >= now_, "event clock moved backwards");
    now_ = ev.time;
    return ev;
  }

 private:
  struct Later {
    bool operator()(const Event& x, const Event& y) const {
      return x.time != y.time ? x.time > y.time : x.sequence > y.sequence;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  Time now_ = 0;
  std::uint64_t next_seq_ = 0;
};

}  // namespace dflysim
