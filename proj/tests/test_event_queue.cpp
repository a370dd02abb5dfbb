#include <gtest/gtest.h>

#include "dflysim/event_queue.hpp"

using namespace dflysim;

TEST(EventQueue, PopsInTimeThenScheduleOrder) {
  EventQueue q;
  q.schedule({50, 0, EventKind::credit_return, 1});
  q.schedule({10, 0, EventKind::credit_return, 2});
  q.schedule({50, 0, EventKind::credit_return, 3});
  q.schedule({10, 0, EventKind::credit_return, 4});
  std::vector<int> order;
  while (!q.empty()) order.push_back(q.pop().a);
  EXPECT_EQ(order, (std::vector<int>{2, 4, 1, 3}));
  EXPECT_EQ(q.now(), 50);
}

TEST(EventQueue, RejectsEventsInThePast) {
  EventQueue q;
  q.schedule({100, 0, EventKind::metric_tick});
  q.pop();
  EXPECT_THROW(q.schedule({99, 0, EventKind::metric_tick}), InvariantError);
  EXPECT_NO_THROW(q.schedule({100, 0, EventKind::metric_tick}));
}

TEST(EventQueue, ReplayIsIdentical) {
  auto replay = [] {
    EventQueue q;
    Rng rng(42);
    std::vector<std::pair<Time, int>> log;
    for (int i = 0; i < 64; ++i) q.schedule({static_cast<Time>(rng.below(20)), 0, EventKind::flit_arrival, i});
    int next = 64;
    while (!q.empty()) {
      const Event e = q.pop();
      log.emplace_back(e.time, e.a);
      if (next < 4000 && rng.below(2))
        q.schedule({e.time + static_cast<Time>(rng.below(5)), 0, EventKind::flit_arrival, next++});
    }
    return log;
  };
  const auto a = replay(), b = replay();
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [](auto& x, auto& y) { return x.first < y.first; }));
}
