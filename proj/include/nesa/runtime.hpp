#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string_view>
#include <thread>
#include <vector>

namespace nesa {

enum class AccessMode { read, add, write };

enum class TaskKind {
  near,
  radiation,
  source_transfer,
  translation,
  potential_transfer,
  reception,
  generic,
};

inline constexpr std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::near: return "near";
    case TaskKind::radiation: return "radiation";
    case TaskKind::source_transfer: return "source-transfer";
    case TaskKind::translation: return "translation";
    case TaskKind::potential_transfer: return "potential-transfer";
    case TaskKind::reception: return "reception";
    case TaskKind::generic: return "generic";
  }
  return "generic";
}

inline TaskKind task_kind_from_string(std::string_view name) {
  for (auto kind : {TaskKind::near, TaskKind::radiation, TaskKind::source_transfer,
                    TaskKind::translation, TaskKind::potential_transfer, TaskKind::reception,
                    TaskKind::generic}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown task kind");
}

/// Names a piece of shared data registered with a Runtime.
struct Handle {
  std::size_t id = 0;
  friend bool operator==(const Handle&, const Handle&) = default;
};

struct Access {
  Handle handle;
  AccessMode mode = AccessMode::read;
};

struct Task {
  TaskKind kind = TaskKind::generic;
  std::vector<Access> accesses;
  std::function<void()> body;
};

struct TraceEvent {
  unsigned worker = 0;
  TaskKind kind = TaskKind::generic;
  std::uint64_t sequence = 0;
  std::int64_t start_ns = 0;  // relative to runtime creation
  std::int64_t end_ns = 0;

  std::int64_t duration_ns() const { return end_ns - start_ns; }
};

struct RuntimeConfig {
  unsigned workers = 1;
  bool trace = false;
  // Stress mode: workers pick a random ready task and a random victim.
  bool randomize = false;
  std::uint64_t seed = 0;
};

/// Dependency-aware task runtime.
///
/// Accesses to a handle are ordered by submission, except that consecutive
/// reads may run concurrently and consecutive adds may run in any order. Adds
/// to one handle never overlap: a task claims all of its add handles before
/// running, in handle-id order, and parks on the first busy one. Tasks are
/// submitted and the barrier is called from one thread; the workers are
/// separate threads.
class Runtime {
 public:
  explicit Runtime(RuntimeConfig config)
      : config_(config), origin_(Clock::now()), instance_(next_instance()) {
    if (config_.workers == 0) throw std::invalid_argument("Runtime: need at least one worker");
    queues_ = std::vector<ReadyQueue>(config_.workers);
    traces_.resize(config_.workers);
    threads_.reserve(config_.workers);
    for (unsigned w = 0; w < config_.workers; ++w) threads_.emplace_back([this, w] { work(w); });
  }

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  ~Runtime() {
    try {
      shutdown();
    } catch (...) {
    }
  }

  unsigned worker_count() const { return config_.workers; }
  /// Process-unique id of this runtime.
  std::uint64_t instance_id() const { return instance_; }
  const RuntimeConfig& config() const { return config_; }

  Handle create_handle() {
    handles_.push_back(std::make_unique<HandleState>());
    return Handle{handles_.size() - 1};
  }

  std::size_t handle_count() const { return handles_.size(); }

  void submit(Task task) {
    if (stopped_) throw std::logic_error("Runtime: submit after shutdown");
    if (!task.body) throw std::invalid_argument("Runtime: task without body");

    auto record = std::make_unique<TaskRecord>();
    record->kind = task.kind;
    record->body = std::move(task.body);
    record->sequence = sequence_++;
    record->pending.store(task.accesses.size() + 1, std::memory_order_relaxed);

    std::vector<std::size_t> seen;
    for (const Access& a : task.accesses) {
      if (a.handle.id >= handles_.size()) throw std::invalid_argument("Runtime: unknown handle");
      seen.push_back(a.handle.id);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
      throw std::invalid_argument("Runtime: handle registered twice in one task");
    }

    TaskRecord* rec = record.get();
    for (const Access& a : task.accesses) {
      HandleState& h = *handles_[a.handle.id];
      rec->accesses.push_back(&h);
      if (a.mode == AccessMode::add) rec->add_handles.push_back({a.handle.id, &h});
    }
    std::sort(rec->add_handles.begin(), rec->add_handles.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });

    records_.push_back(std::move(record));
    submitted_.fetch_add(1, std::memory_order_acq_rel);

    for (const Access& a : task.accesses) {
      HandleState& h = *handles_[a.handle.id];
      // A run of reads, or a run of adds, forms one group; a write is a group of its own.
      if (!h.has_group || a.mode == AccessMode::write || a.mode != h.group_mode) {
        h.group_start = h.registered;
        h.group_mode = a.mode;
        h.has_group = true;
      }
      const std::uint64_t required = h.group_start;
      ++h.registered;

      std::lock_guard lock(h.mutex);
      if (h.completed >= required) {
        rec->pending.fetch_sub(1, std::memory_order_acq_rel);
      } else {
        h.waiting.push_back({rec, required});
      }
    }
    if (rec->pending.fetch_sub(1, std::memory_order_acq_rel) == 1) {
      push_ready(rec, next_queue_);
      next_queue_ = (next_queue_ + 1) % config_.workers;
    }
  }

  /// Blocks until every submitted task has completed. Rethrows the first
  /// exception raised by a task body.
  void barrier() {
    {
      std::unique_lock lock(done_mutex_);
      done_cv_.wait(lock, [&] {
        return finished_.load(std::memory_order_acquire) ==
               submitted_.load(std::memory_order_acquire);
      });
    }
    records_.clear();
    if (error_) {
      auto e = std::exchange(error_, nullptr);
      std::rethrow_exception(e);
    }
  }

  /// Events of all tasks executed since creation or the last clear_trace().
  /// Only meaningful after barrier().
  std::vector<TraceEvent> trace() const {
    std::vector<TraceEvent> all;
    for (const auto& t : traces_) all.insert(all.end(), t.events.begin(), t.events.end());
    std::sort(all.begin(), all.end(), [](const TraceEvent& a, const TraceEvent& b) {
      return a.start_ns < b.start_ns || (a.start_ns == b.start_ns && a.sequence < b.sequence);
    });
    return all;
  }

  void clear_trace() {
    for (auto& t : traces_) t.events.clear();
  }

  /// Nanoseconds since runtime creation, on the clock used for trace events.
  std::int64_t now_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - origin_).count();
  }

  std::uint64_t submitted_count() const { return submitted_.load(); }
  std::uint64_t finished_count() const { return finished_.load(); }

  void shutdown() {
    if (stopped_) return;
    std::exception_ptr pending_error;
    try {
      barrier();
    } catch (...) {
      pending_error = std::current_exception();
    }
    {
      std::lock_guard lock(sleep_mutex_);
      stopping_ = true;
    }
    sleep_cv_.notify_all();
    for (auto& t : threads_) t.join();
    threads_.clear();
    stopped_ = true;
    if (pending_error) std::rethrow_exception(pending_error);
  }

 private:
  using Clock = std::chrono::steady_clock;
  struct TaskRecord;

  static std::uint64_t next_instance() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
  }

  struct Waiter {
    TaskRecord* task;
    std::uint64_t required;
  };

  struct HandleState {
    // Submitter-side bookkeeping.
    std::uint64_t registered = 0;
    std::uint64_t group_start = 0;
    AccessMode group_mode = AccessMode::read;
    bool has_group = false;

    std::mutex mutex;
    std::uint64_t completed = 0;
    std::deque<Waiter> waiting;  // nondecreasing `required`
    bool add_claimed = false;
    std::vector<TaskRecord*> parked;
  };

  struct TaskRecord {
    TaskKind kind = TaskKind::generic;
    std::function<void()> body;
    std::uint64_t sequence = 0;
    std::atomic<std::size_t> pending{0};
    std::vector<HandleState*> accesses;
    std::vector<std::pair<std::size_t, HandleState*>> add_handles;
  };

  struct ReadyQueue {
    std::mutex mutex;
    std::deque<TaskRecord*> tasks;
  };

  struct WorkerTrace {
    std::vector<TraceEvent> events;
  };

  void push_ready(TaskRecord* rec, unsigned queue) {
    {
      std::lock_guard lock(queues_[queue].mutex);
      queues_[queue].tasks.push_back(rec);
    }
    queued_.fetch_add(1, std::memory_order_acq_rel);
    { std::lock_guard lock(sleep_mutex_); }
    sleep_cv_.notify_one();
  }

  TaskRecord* pop(unsigned worker, std::mt19937_64& rng) {
    const unsigned n = config_.workers;
    const unsigned offset = config_.randomize ? static_cast<unsigned>(rng() % n) : 0;
    for (unsigned k = 0; k < n; ++k) {
      const unsigned victim = (worker + offset + k) % n;
      ReadyQueue& q = queues_[victim];
      std::lock_guard lock(q.mutex);
      if (q.tasks.empty()) continue;
      TaskRecord* rec = nullptr;
      if (config_.randomize) {
        const auto i = static_cast<std::ptrdiff_t>(rng() % q.tasks.size());
        rec = q.tasks[static_cast<std::size_t>(i)];
        q.tasks.erase(q.tasks.begin() + i);
      } else if (victim == worker) {
        rec = q.tasks.front();
        q.tasks.pop_front();
      } else {
        rec = q.tasks.back();
        q.tasks.pop_back();
      }
      queued_.fetch_sub(1, std::memory_order_acq_rel);
      return rec;
    }
    return nullptr;
  }

  // Claims every add handle of `rec` or parks it on the first busy one.
  bool claim(TaskRecord* rec) {
    for (std::size_t i = 0; i < rec->add_handles.size(); ++i) {
      HandleState& h = *rec->add_handles[i].second;
      std::unique_lock lock(h.mutex);
      if (h.add_claimed) {
        h.parked.push_back(rec);
        lock.unlock();
        for (std::size_t k = 0; k < i; ++k) release(*rec->add_handles[k].second, 0);
        return false;
      }
      h.add_claimed = true;
    }
    return true;
  }

  void release(HandleState& h, unsigned worker) {
    std::vector<TaskRecord*> wake;
    {
      std::lock_guard lock(h.mutex);
      h.add_claimed = false;
      wake.swap(h.parked);
    }
    for (TaskRecord* r : wake) push_ready(r, worker);
  }

  void complete(TaskRecord* rec, unsigned worker) {
    for (auto& [id, h] : rec->add_handles) release(*h, worker);
    for (HandleState* h : rec->accesses) {
      std::vector<TaskRecord*> ready;
      {
        std::lock_guard lock(h->mutex);
        ++h->completed;
        while (!h->waiting.empty() && h->waiting.front().required <= h->completed) {
          TaskRecord* next = h->waiting.front().task;
          h->waiting.pop_front();
          if (next->pending.fetch_sub(1, std::memory_order_acq_rel) == 1) ready.push_back(next);
        }
      }
      for (TaskRecord* r : ready) push_ready(r, worker);
    }
    const auto done = finished_.fetch_add(1, std::memory_order_acq_rel) + 1;
    if (done == submitted_.load(std::memory_order_acquire)) {
      std::lock_guard lock(done_mutex_);
      done_cv_.notify_all();
    }
  }

  void work(unsigned worker) {
    std::mt19937_64 rng(config_.seed * 0x9e3779b97f4a7c15ULL + worker + 1);
    while (true) {
      TaskRecord* rec = pop(worker, rng);
      if (!rec) {
        std::unique_lock lock(sleep_mutex_);
        sleep_cv_.wait(lock, [&] { return queued_.load(std::memory_order_acquire) > 0 || stopping_; });
        if (stopping_ && queued_.load(std::memory_order_acquire) == 0) return;
        continue;
      }
      if (!claim(rec)) continue;

      const std::int64_t start = config_.trace ? now_ns() : 0;
      try {
        rec->body();
      } catch (...) {
        std::lock_guard lock(done_mutex_);
        if (!error_) error_ = std::current_exception();
      }
      if (config_.trace) {
        traces_[worker].events.push_back({worker, rec->kind, rec->sequence, start, now_ns()});
      }
      complete(rec, worker);
    }
  }

  RuntimeConfig config_;
  Clock::time_point origin_;
  std::uint64_t instance_;

  std::vector<std::unique_ptr<HandleState>> handles_;
  std::vector<std::unique_ptr<TaskRecord>> records_;
  std::uint64_t sequence_ = 0;
  unsigned next_queue_ = 0;
  bool stopped_ = false;

  std::vector<ReadyQueue> queues_;
  std::atomic<std::size_t> queued_{0};
  std::mutex sleep_mutex_;
  std::condition_variable sleep_cv_;
  bool stopping_ = false;

  std::atomic<std::uint64_t> submitted_{0};
  std::atomic<std::uint64_t> finished_{0};
  std::mutex done_mutex_;
  std::condition_variable done_cv_;
  std::exception_ptr error_;

  std::vector<WorkerTrace> traces_;
  std::vector<std::thread> threads_;
};

}  // namespace nesa
