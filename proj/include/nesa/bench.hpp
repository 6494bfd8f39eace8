#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nesa/dense_oracle.hpp"
#include "nesa/fast_mvp.hpp"
#include "nesa/geometry.hpp"
#include "nesa/operators.hpp"
#include "nesa/quadtree.hpp"
#include "nesa/runtime.hpp"

namespace nesa {

// ---------------------------------------------------------------------------
// Metrics

/// S_p = T_1 / T_p.
inline double speedup(double t1, double tp) {
  if (!(t1 > 0.0) || !(tp > 0.0)) throw std::invalid_argument("speedup: durations must be > 0");
  return t1 / tp;
}

/// Total time spent inside task bodies.
inline double task_time_ns(std::span<const TraceEvent> trace) {
  double total = 0.0;
  for (const TraceEvent& e : trace) total += static_cast<double>(e.duration_ns());
  return total;
}

/// U_p = (sum of task durations) / (p * T_p). `tp` is in the unit of the trace
/// (nanoseconds).
inline double utilization(std::span<const TraceEvent> trace, unsigned p, double tp_ns) {
  if (p == 0) throw std::invalid_argument("utilization: p must be >= 1");
  if (!(tp_ns > 0.0)) throw std::invalid_argument("utilization: T_p must be > 0");
  return task_time_ns(trace) / (static_cast<double>(p) * tp_ns);
}

/// G = T_baseline / T_this - 1.
inline double gain(double t_baseline, double t_this) {
  if (!(t_baseline > 0.0) || !(t_this > 0.0)) throw std::invalid_argument("gain: durations must be > 0");
  return t_baseline / t_this - 1.0;
}

struct KindStats {
  std::size_t count = 0;
  double mean_ns = 0.0;
  double min_ns = 0.0;
  double max_ns = 0.0;
};

inline std::map<TaskKind, KindStats> per_type_stats(std::span<const TraceEvent> trace) {
  std::map<TaskKind, KindStats> stats;
  for (const TraceEvent& e : trace) {
    const double d = static_cast<double>(e.duration_ns());
    auto [it, inserted] = stats.try_emplace(e.kind, KindStats{0, 0.0, d, d});
    KindStats& s = it->second;
    ++s.count;
    s.mean_ns += d;
    s.min_ns = std::min(s.min_ns, d);
    s.max_ns = std::max(s.max_ns, d);
  }
  for (auto& [kind, s] : stats) s.mean_ns /= static_cast<double>(s.count);
  return stats;
}

/// Mean task time on p threads relative to the single-thread mean, per kind
/// present in both runs.
inline std::map<TaskKind, double> slowdown(const std::map<TaskKind, KindStats>& on_p,
                                           const std::map<TaskKind, KindStats>& on_one) {
  std::map<TaskKind, double> ratio;
  for (const auto& [kind, s] : on_p) {
    const auto it = on_one.find(kind);
    if (it != on_one.end() && it->second.mean_ns > 0.0) ratio[kind] = s.mean_ns / it->second.mean_ns;
  }
  return ratio;
}

// ---------------------------------------------------------------------------
// Chrome trace-event format

inline nlohmann::json trace_to_json(std::span<const TraceEvent> trace) {
  nlohmann::json events = nlohmann::json::array();
  for (const TraceEvent& e : trace) {
    events.push_back({{"name", std::string(to_string(e.kind))},
                      {"ph", "X"},
                      {"ts", static_cast<double>(e.start_ns) / 1000.0},
                      {"dur", static_cast<double>(e.duration_ns()) / 1000.0},
                      {"pid", 1},
                      {"tid", e.worker},
                      {"args", {{"seq", e.sequence}}}});
  }
  return events;
}

inline void export_trace(std::span<const TraceEvent> trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_trace: cannot open " + path.string());
  out << trace_to_json(trace).dump() << '\n';
  if (!out) throw std::runtime_error("export_trace: write failed for " + path.string());
}

inline std::vector<TraceEvent> parse_trace(const nlohmann::json& events) {
  if (!events.is_array()) throw std::runtime_error("parse_trace: expected a JSON array");
  std::vector<TraceEvent> trace;
  for (const auto& ev : events) {
    if (ev.at("ph").get<std::string>() != "X") throw std::runtime_error("parse_trace: unexpected phase");
    TraceEvent e;
    e.kind = task_kind_from_string(ev.at("name").get<std::string>());
    e.worker = ev.at("tid").get<unsigned>();
    e.start_ns = std::llround(ev.at("ts").get<double>() * 1000.0);
    e.end_ns = e.start_ns + std::llround(ev.at("dur").get<double>() * 1000.0);
    if (ev.contains("args") && ev["args"].contains("seq")) e.sequence = ev["args"]["seq"].get<std::uint64_t>();
    trace.push_back(e);
  }
  return trace;
}

inline std::vector<TraceEvent> parse_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_trace: cannot open " + path.string());
  return parse_trace(nlohmann::json::parse(in));
}

// ---------------------------------------------------------------------------
// Benchmark driver

enum class BenchMode { dense, serial, parallel, verify };

inline std::string_view to_string(BenchMode m) {
  switch (m) {
    case BenchMode::dense: return "dense";
    case BenchMode::serial: return "serial";
    case BenchMode::parallel: return "parallel";
    case BenchMode::verify: return "verify";
  }
  return "dense";
}

inline BenchMode bench_mode_from_string(std::string_view name) {
  for (auto m : {BenchMode::dense, BenchMode::serial, BenchMode::parallel, BenchMode::verify})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown mode: " + std::string(name));
}

inline std::string_view to_string(MvpPart part) {
  switch (part) {
    case MvpPart::near_field: return "near";
    case MvpPart::far_field: return "far";
    case MvpPart::both: return "both";
  }
  return "both";
}

inline MvpPart mvp_part_from_string(std::string_view name) {
  for (auto p : {MvpPart::near_field, MvpPart::far_field, MvpPart::both})
    if (to_string(p) == name) return p;
  throw std::invalid_argument("unknown part: " + std::string(name));
}

struct BenchConfig {
  std::size_t n = 100000;
  double points_per_leaf = 50.0;
  std::size_t q = 10;
  std::vector<unsigned> threads{1};
  std::uint64_t seed = 1;
  CurveSpec curve = WaveCurve{};
  std::set<BenchMode> modes{BenchMode::parallel};
  MvpPart part = MvpPart::both;
  std::size_t repeats = 3;
  std::optional<std::filesystem::path> report_out;
  std::optional<std::filesystem::path> trace_out;
  std::optional<std::filesystem::path> csv_out;
};

inline void validate(const BenchConfig& c) {
  if (c.n < 2) throw std::invalid_argument("BenchConfig: N must be >= 2");
  if (c.repeats < 1) throw std::invalid_argument("BenchConfig: repeats must be >= 1");
  if (c.modes.empty()) throw std::invalid_argument("BenchConfig: no mode selected");
  if (c.modes.contains(BenchMode::parallel)) {
    if (c.threads.empty()) throw std::invalid_argument("BenchConfig: parallel mode needs thread counts");
    for (unsigned p : c.threads)
      if (p == 0) throw std::invalid_argument("BenchConfig: thread counts must be >= 1");
  }
}

struct RunRecord {
  std::string mode;  // "serial" or "parallel"
  unsigned p = 1;
  std::vector<double> samples_ms;
  double t_ms = 0.0;  // minimum of samples
  std::optional<double> speedup;
  std::optional<double> utilization;
  double task_time_ms = 0.0;
  std::size_t task_count = 0;
  std::map<TaskKind, KindStats> per_kind;
  std::map<TaskKind, double> slowdown;
};

struct BenchReport {
  BenchConfig config;
  std::optional<TreeStats> tree;
  std::optional<double> tree_build_ms;
  std::optional<double> operator_build_ms;
  std::map<TaskKind, std::size_t> task_counts;
  std::optional<std::vector<double>> dense_samples_ms;
  std::optional<double> dense_ms;
  std::vector<RunRecord> runs;
  std::optional<double> relative_error;
  std::vector<TraceEvent> trace;  // best repeat of the largest p
  unsigned trace_p = 0;
};

/// Deterministic benchmark charges: uniform in [-1, 1) from mt19937_64(seed).
inline Vector bench_charges(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector q(n);
  for (double& x : q) x = dist(rng);
  return q;
}

namespace detail {

template <class F>
double time_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

inline nlohmann::json to_json(const TreeStats& s) {
  return {{"coarsest_level", s.coarsest_level},
          {"finest_level", s.finest_level},
          {"active_levels", s.active_levels},
          {"groups_per_level", s.groups_per_level},
          {"leaf_count", s.leaf_count},
          {"child_count", s.child_count},
          {"mean_children", s.mean_children},
          {"mean_neighbors", s.mean_neighbors},
          {"mean_interaction", s.mean_interaction},
          {"mean_interaction_per_level", s.mean_interaction_per_level},
          {"near_pairs", s.near_pairs},
          {"interaction_pairs", s.interaction_pairs}};
}

inline nlohmann::json to_json(const BenchReport& r) {
  using nlohmann::json;
  const BenchConfig& c = r.config;
  json modes = json::array();
  for (auto m : c.modes) modes.push_back(std::string(to_string(m)));
  json report;
  report["config"] = {{"n", c.n},
                      {"p_avg", c.points_per_leaf},
                      {"q", c.q},
                      {"threads", c.threads},
                      {"seed", c.seed},
                      {"curve", curve_name(c.curve)},
                      {"modes", modes},
                      {"part", std::string(to_string(c.part))},
                      {"repeats", c.repeats}};
  if (r.tree) report["tree"] = to_json(*r.tree);
  if (r.tree_build_ms) report["build_ms"]["tree"] = *r.tree_build_ms;
  if (r.operator_build_ms) report["build_ms"]["operators"] = *r.operator_build_ms;
  if (!r.task_counts.empty()) {
    json counts = json::object();
    for (const auto& [k, n] : r.task_counts) counts[std::string(to_string(k))] = n;
    report["task_counts"] = counts;
  }
  if (r.dense_ms) report["dense"] = {{"samples_ms", *r.dense_samples_ms}, {"T_ms", *r.dense_ms}};
  json runs = json::array();
  for (const RunRecord& run : r.runs) {
    json j{{"mode", run.mode},
           {"p", run.p},
           {"samples_ms", run.samples_ms},
           {"T_ms", run.t_ms},
           {"task_count", run.task_count}};
    if (run.mode != "parallel") {
      runs.push_back(j);
      continue;
    }
    j["task_time_ms"] = run.task_time_ms;
    j["S"] = run.speedup ? json(*run.speedup) : json(nullptr);
    j["U"] = run.utilization ? json(*run.utilization) : json(nullptr);
    json kinds = json::object();
    for (const auto& [k, s] : run.per_kind) {
      json ks{{"count", s.count}, {"mean_us", s.mean_ns / 1e3}, {"min_us", s.min_ns / 1e3},
              {"max_us", s.max_ns / 1e3}};
      if (auto it = run.slowdown.find(k); it != run.slowdown.end()) ks["slowdown"] = it->second;
      kinds[std::string(to_string(k))] = ks;
    }
    j["per_kind"] = kinds;
    runs.push_back(j);
  }
  report["runs"] = runs;
  if (r.relative_error) report["accuracy"] = {{"relative_l2_error", *r.relative_error}};
  return report;
}

/// Table rows p,T_ms,S,U for every parallel run.
inline std::string to_csv(const BenchReport& r) {
  std::ostringstream out;
  out << "p,T_ms,S,U\n";
  for (const RunRecord& run : r.runs) {
    if (run.mode != "parallel") continue;
    out << run.p << ',' << run.t_ms << ',' << run.speedup.value_or(0.0) << ','
        << run.utilization.value_or(0.0) << '\n';
  }
  return out.str();
}

/// Builds the problem once, then times every selected mode. T_p spans task
/// submission through barrier return and is the minimum over repeats; every
/// raw sample is kept. A parallel run at p = 1 is always measured because it
/// is the speedup baseline.
inline BenchReport run_benchmark(const BenchConfig& config) {
  validate(config);
  BenchReport report;
  report.config = config;
  const auto& modes = config.modes;

  const auto points = generate_sources(config.curve, config.n);
  const Vector q = bench_charges(config.n, config.seed);

  std::optional<Vector> dense;
  if (modes.contains(BenchMode::dense)) {
    std::vector<double> samples;
    for (std::size_t k = 0; k < config.repeats; ++k)
      samples.push_back(detail::time_ms([&] { dense = dense_matvec(points, q); }));
    report.dense_ms = *std::min_element(samples.begin(), samples.end());
    report.dense_samples_ms = std::move(samples);
  }

  const bool needs_fast = modes.contains(BenchMode::serial) || modes.contains(BenchMode::parallel) ||
                          modes.contains(BenchMode::verify);
  if (!needs_fast) {
    report.config.threads.clear();
    return report;
  }

  std::optional<Tree> tree;
  report.tree_build_ms = detail::time_ms([&] {
    tree = build_tree(points, TreeParams{config.points_per_leaf, 4});
  });
  report.tree = tree_stats(*tree);
  NesaParams params;
  params.q = config.q;
  OperatorSet ops;
  report.operator_build_ms = detail::time_ms([&] { ops = build_all(*tree, params); });

  MvpPlan plan(*tree, ops);
  report.task_counts = plan.task_counts(config.part);
  std::size_t total_tasks = 0;
  for (const auto& [k, n] : report.task_counts) total_tasks += n;

  std::optional<Vector> fast_result;
  if (modes.contains(BenchMode::serial)) {
    RunRecord run;
    run.mode = "serial";
    for (std::size_t k = 0; k < config.repeats; ++k) {
      plan.prepare(q);
      run.samples_ms.push_back(detail::time_ms([&] { plan.run_serial(config.part); }));
    }
    run.t_ms = *std::min_element(run.samples_ms.begin(), run.samples_ms.end());
    run.task_count = total_tasks;
    fast_result = plan.result();
    report.runs.push_back(std::move(run));
  }

  if (modes.contains(BenchMode::parallel)) {
    std::vector<unsigned> threads = config.threads;
    if (std::find(threads.begin(), threads.end(), 1u) == threads.end()) threads.insert(threads.begin(), 1u);
    std::sort(threads.begin(), threads.end());
    threads.erase(std::unique(threads.begin(), threads.end()), threads.end());
    report.config.threads = threads;

    std::map<TaskKind, KindStats> single_thread_stats;
    double t1 = 0.0;
    for (unsigned p : threads) {
      Runtime rt(RuntimeConfig{p, true});
      plan.prepare(q);
      plan.run(rt, config.part);  // warm-up, also creates the handles
      rt.clear_trace();

      RunRecord run;
      run.mode = "parallel";
      run.p = p;
      std::vector<TraceEvent> best_trace;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < config.repeats; ++k) {
        plan.prepare(q);
        rt.clear_trace();
        const double ms = detail::time_ms([&] { plan.run(rt, config.part); });
        run.samples_ms.push_back(ms);
        if (ms < best) {
          best = ms;
          best_trace = rt.trace();
        }
      }
      run.t_ms = best;
      run.task_count = best_trace.size();
      run.task_time_ms = task_time_ns(best_trace) / 1e6;
      run.utilization = utilization(best_trace, p, best * 1e6);
      run.per_kind = per_type_stats(best_trace);
      if (p == 1) {
        t1 = best;
        single_thread_stats = run.per_kind;
      }
      run.speedup = speedup(t1, best);
      run.slowdown = slowdown(run.per_kind, single_thread_stats);
      fast_result = plan.result();
      report.trace = std::move(best_trace);
      report.trace_p = p;
      report.runs.push_back(std::move(run));
    }
  }

  if (modes.contains(BenchMode::verify)) {
    if (!fast_result) {
      plan.prepare(q);
      plan.run_serial(config.part);
      fast_result = plan.result();
    }
    if (!dense) dense = dense_matvec(points, q);
    // A partial product is checked against the oracle minus the other part.
    if (config.part != MvpPart::both) {
      const MvpPart other = config.part == MvpPart::near_field ? MvpPart::far_field : MvpPart::near_field;
      const Vector rest = mvp_serial(*tree, ops, q, other);
      for (std::size_t i = 0; i < dense->size(); ++i) (*dense)[i] -= rest[i];
    }
    report.relative_error = relative_error(*fast_result, *dense);
  }
  return report;
}

/// Writes every requested output of a finished benchmark.
inline void write_outputs(const BenchReport& report) {
  const BenchConfig& c = report.config;
  if (c.report_out) {
    std::ofstream out(*c.report_out);
    if (!out) throw std::runtime_error("cannot open report file " + c.report_out->string());
    out << to_json(report).dump(2) << '\n';
  }
  if (c.trace_out) export_trace(report.trace, *c.trace_out);
  if (c.csv_out) {
    std::ofstream out(*c.csv_out);
    if (!out) throw std::runtime_error("cannot open CSV file " + c.csv_out->string());
    out << to_csv(report);
  }
}

/// G_p for every p present as a parallel run in both reports.
inline std::map<unsigned, double> gain_between(const nlohmann::json& baseline,
                                               const nlohmann::json& candidate) {
  auto times = [](const nlohmann::json& report) {
    std::map<unsigned, double> t;
    for (const auto& run : report.at("runs"))
      if (run.at("mode") == "parallel") t[run.at("p").get<unsigned>()] = run.at("T_ms").get<double>();
    return t;
  };
  const auto base = times(baseline);
  const auto cand = times(candidate);
  std::map<unsigned, double> g;
  for (const auto& [p, t] : cand)
    if (auto it = base.find(p); it != base.end()) g[p] = gain(it->second, t);
  return g;
}

}  // namespace nesa
