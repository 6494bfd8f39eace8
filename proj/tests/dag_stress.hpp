#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include "nesa/runtime.hpp"

namespace nesa::testing {

// Per-handle counters of bodies currently inside a given access mode.
struct Monitor {
  struct Counts {
    std::atomic<int> readers{0}, adders{0}, writers{0};
  };
  std::vector<Counts> per_handle;
  std::atomic<int> violations{0};

  explicit Monitor(std::size_t handles) : per_handle(handles) {}

  void enter(std::size_t h, AccessMode m) {
    Counts& c = per_handle[h];
    switch (m) {
      case AccessMode::read: ++c.readers; break;
      case AccessMode::add: ++c.adders; break;
      case AccessMode::write: ++c.writers; break;
    }
    const int r = c.readers, a = c.adders, w = c.writers;
    if (w > 1 || a > 1 || (w && (r || a)) || (a && r)) ++violations;
  }
  void leave(std::size_t h, AccessMode m) {
    Counts& c = per_handle[h];
    switch (m) {
      case AccessMode::read: --c.readers; break;
      case AccessMode::add: --c.adders; break;
      case AccessMode::write: --c.writers; break;
    }
  }
};

struct DagResult {
  int violations = 0;
  bool exactly_once = true;
  bool values_match = true;
};

// Random DAG over integer cells. Reads fold the current values into a key;
// writes overwrite, adds accumulate (commutative). The final cell values
// must match executing the tasks serially in submission order.
inline DagResult run_random_dag(unsigned workers, std::uint64_t seed, bool randomize) {
  std::mt19937_64 rng(seed);
  const std::size_t n_handles = 2 + rng() % 24;
  const std::size_t n_tasks = 1 + rng() % 500;

  struct Spec {
    std::vector<std::pair<std::size_t, AccessMode>> accesses;
  };
  std::vector<Spec> specs(n_tasks);
  for (Spec& s : specs) {
    std::vector<std::size_t> pool(n_handles);
    for (std::size_t i = 0; i < n_handles; ++i) pool[i] = i;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t k = rng() % std::min<std::size_t>(4, n_handles + 1);
    for (std::size_t i = 0; i < k; ++i) {
      const auto roll = rng() % 10;
      const AccessMode m = roll < 4 ? AccessMode::read : roll < 8 ? AccessMode::add : AccessMode::write;
      s.accesses.push_back({pool[i], m});
    }
  }

  auto execute = [](const Spec& s, std::size_t id, std::vector<std::uint64_t>& cells) {
    std::uint64_t key = id * 0x9e3779b97f4a7c15ULL + 1;
    for (const auto& [h, m] : s.accesses)
      if (m == AccessMode::read) key = key * 31 + cells[h];
    for (const auto& [h, m] : s.accesses) {
      if (m == AccessMode::add) cells[h] += key;
      if (m == AccessMode::write) cells[h] = cells[h] * 7 + key;
    }
  };

  std::vector<std::uint64_t> expected(n_handles, 0);
  for (std::size_t i = 0; i < n_tasks; ++i) execute(specs[i], i, expected);

  std::vector<std::uint64_t> cells(n_handles, 0);
  std::vector<std::atomic<int>> runs(n_tasks);
  Monitor monitor(n_handles);
  {
    Runtime rt(RuntimeConfig{workers, false, randomize, seed});
    std::vector<Handle> handles;
    for (std::size_t i = 0; i < n_handles; ++i) handles.push_back(rt.create_handle());
    for (std::size_t i = 0; i < n_tasks; ++i) {
      Task t;
      for (const auto& [h, m] : specs[i].accesses) t.accesses.push_back({handles[h], m});
      t.body = [&, i] {
        for (const auto& [h, m] : specs[i].accesses) monitor.enter(h, m);
        if (i % 17 == 0) std::this_thread::yield();
        execute(specs[i], i, cells);
        for (const auto& [h, m] : specs[i].accesses) monitor.leave(h, m);
        ++runs[i];
      };
      rt.submit(std::move(t));
    }
    rt.barrier();
  }
  DagResult r;
  r.violations = monitor.violations;
  for (auto& c : runs) r.exactly_once = r.exactly_once && c == 1;
  r.values_match = cells == expected;
  return r;
}

}  // namespace nesa::testing
