// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exit code is
// nonzero when any criterion fails.
//
// The large-task performance check needs at least 8 cores; it is skipped on
// smaller machines unless NESA_FORCE_PERF=1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dag_stress.hpp"
#include "nesa/bench.hpp"
#include "nesa/dense_oracle.hpp"
#include "nesa/fast_mvp.hpp"
#include "support.hpp"

using namespace nesa;

namespace {

enum class Outcome { pass, fail, skip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Problem {
  std::vector<Point2> points;
  Tree tree;
  OperatorSet ops;
};

Problem wave_problem(std::size_t n, double p_avg, std::size_t q) {
  auto pts = generate_sources(WaveCurve{}, n);
  Tree tree = build_tree(pts, {p_avg, 4});
  NesaParams params;
  params.q = q;
  OperatorSet ops = build_all(tree, params);
  return {std::move(pts), std::move(tree), std::move(ops)};
}

Vector masked_near(const Tree& tree, std::span<const double> q) {
  const auto perm = tree.permutation();
  Vector qt(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) qt[perm[i]] = q[i];
  Vector phi_t(q.size(), 0.0);
  for (const Group& a : tree.leaves())
    for (std::size_t i = a.point_begin; i < a.point_end; ++i)
      for (GroupId bid : a.adjacent) {
        const Group& b = tree.group(bid);
        for (std::size_t j = b.point_begin; j < b.point_end; ++j)
          phi_t[i] += kernel_eval(tree.points()[i], tree.points()[j], i == j) * qt[j];
      }
  Vector phi(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) phi[i] = phi_t[perm[i]];
  return phi;
}

// 1. Oracle equivalence and convergence in Q.
Verdict oracle_equivalence() {
  const std::size_t qs[] = {6, 8, 10, 12, 14, 16};
  std::ostringstream detail;
  bool ok = true;
  for (std::size_t n : {1000u, 20000u}) {
    const auto pts = generate_sources(WaveCurve{}, n);
    const Vector charges = bench_charges(n, 1);
    const Vector dense = dense_matvec(pts, charges);
    const Tree tree = build_tree(pts, {50.0, 4});
    std::vector<double> err;
    for (std::size_t q : qs) {
      NesaParams params;
      params.q = q;
      const OperatorSet ops = build_all(tree, params);
      err.push_back(relative_error(mvp_serial(tree, ops, charges), dense));
    }
    detail << "N=" << n << ":";
    for (std::size_t k = 0; k < err.size(); ++k) detail << fmt(" Q%zu=%.1e", qs[k], err[k]);
    detail << "; ";
    ok = ok && err[2] <= 1e-3 && err[4] <= 1e-4;
    for (std::size_t k = 1; k < err.size(); ++k) ok = ok && err[k] <= 2.0 * err[k - 1];
  }
  return {ok ? Outcome::pass : Outcome::fail, detail.str()};
}

// 2. Near field equals the masked dense oracle.
Verdict near_field_exactness() {
  double worst = 0.0;
  for (std::size_t n : {1000u, 4096u}) {
    const Problem pr = wave_problem(n, 50, 10);
    const Vector q = bench_charges(n, 2);
    worst = std::max(worst, relative_error(mvp_serial(pr.tree, pr.ops, q, MvpPart::near_field),
                                           masked_near(pr.tree, q)));
  }
  return {worst <= 1e-13 ? Outcome::pass : Outcome::fail, fmt("max relative difference %.1e", worst)};
}

// 3. Near pairs plus per-level interaction pairs cover each leaf pair once.
Verdict interaction_oracle() {
  std::size_t trees = 0, pairs = 0, bad = 0;
  auto check = [&](const std::vector<Point2>& pts, double p_avg) {
    const Tree tree = build_tree(pts, {p_avg, 4});
    ++trees;
    for (const Group& a : tree.leaves())
      for (const Group& b : tree.leaves()) {
        ++pairs;
        int hits = std::ranges::count(a.adjacent, b.id) ? 1 : 0;
        for (int l = tree.coarsest_level(); l <= tree.finest_level(); ++l)
          hits += static_cast<int>(
              std::ranges::count(tree.group(tree.ancestor(a.id, l)).interaction, tree.ancestor(b.id, l)));
        if (hits != 1) ++bad;
      }
  };
  for (std::size_t side : {4u, 8u, 16u, 32u}) check(testing::grid_points(side), 1.0);
  for (std::size_t n : {64u, 256u, 1024u})
    for (double p : {1.0, 4.0, 16.0}) check(generate_sources(WaveCurve{}, n), p);
  return {bad == 0 ? Outcome::pass : Outcome::fail,
          fmt("%zu trees, %zu leaf pairs, %zu miscovered", trees, pairs, bad)};
}

// 4. Tree statistics.
Verdict tree_statistics() {
  const auto uniform = tree_stats(build_tree(testing::grid_points(64), {1.0, 4}));
  bool quadruples = uniform.groups_per_level.size() == 5;
  for (std::size_t k = 1; k < uniform.groups_per_level.size(); ++k)
    quadruples = quadruples && uniform.groups_per_level[k] == 4 * uniform.groups_per_level[k - 1];

  const auto st = tree_stats(build_tree(generate_sources(WaveCurve{}, 100000), {50.0, 4}));
  const bool ok = quadruples && st.mean_children >= 2.0 && st.mean_children <= 3.0 &&
                  st.mean_neighbors >= 4.0 && st.mean_neighbors <= 6.0 && st.mean_interaction < 7.0 &&
                  std::abs(st.active_levels - 8) <= 1;
  return {ok ? Outcome::pass : Outcome::fail,
          fmt("uniform x4 per level: %s; wave: children %.2f, neighbours %.2f, interaction %.2f, levels %d",
              quadruples ? "yes" : "no", st.mean_children, st.mean_neighbors, st.mean_interaction,
              st.active_levels)};
}

// 5. Runtime safety and liveness under random DAGs.
Verdict runtime_stress() {
  std::size_t runs = 0, violations = 0, not_once = 0, mismatched = 0;
  for (unsigned p : {2u, 4u, 8u})
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto r = testing::run_random_dag(p, 1000003 * p + seed, seed % 2 == 1);
      ++runs;
      violations += static_cast<std::size_t>(r.violations);
      not_once += r.exactly_once ? 0 : 1;
      mismatched += r.values_match ? 0 : 1;
    }
  const bool ok = violations == 0 && not_once == 0 && mismatched == 0;
  return {ok ? Outcome::pass : Outcome::fail,
          fmt("%zu DAGs: %zu conflicts, %zu exactly-once failures, %zu value mismatches", runs, violations,
              not_once, mismatched)};
}

// 6. Results agree across thread counts and the serial path.
Verdict cross_p_determinism() {
  const Problem pr = wave_problem(20000, 50, 10);
  const Vector q = bench_charges(20000, 3);
  std::vector<Vector> results{mvp_serial(pr.tree, pr.ops, q)};
  for (unsigned p : {1u, 2u, 4u, 8u}) {
    Runtime rt(RuntimeConfig{p});
    results.push_back(mvp(pr.tree, pr.ops, q, rt));
  }
  double worst = 0.0;
  for (std::size_t a = 0; a < results.size(); ++a)
    for (std::size_t b = a + 1; b < results.size(); ++b)
      worst = std::max(worst, relative_error(results[a], results[b]));
  return {worst <= 1e-12 ? Outcome::pass : Outcome::fail, fmt("max pairwise relative difference %.1e", worst)};
}

// 7. Performance properties.
Verdict performance() {
  BenchConfig small;
  small.n = 100000;
  small.points_per_leaf = 50;
  small.q = 10;
  small.threads = {1, 2, 4, 8};
  small.repeats = 2;
  small.modes = {BenchMode::parallel};
  const BenchReport sr = run_benchmark(small);
  const Problem check = wave_problem(20000, 50, 10);
  const Vector q = bench_charges(20000, 4);
  Runtime rt8(RuntimeConfig{8});
  const double small_err =
      relative_error(mvp(check.tree, check.ops, q, rt8), dense_matvec(check.points, q));
  const bool small_ok = sr.runs.size() == 4 && small_err <= 1e-3;
  std::string detail = fmt("P=50,Q=10: T1=%.1f ms, T8=%.1f ms, S8=%.2f, U8=%.2f, error %.1e",
                           sr.runs.front().t_ms, sr.runs.back().t_ms, sr.runs.back().speedup.value_or(0.0),
                           sr.runs.back().utilization.value_or(0.0), small_err);
  if (!small_ok) return {Outcome::fail, detail};

  const unsigned cores = std::thread::hardware_concurrency();
  const char* force = std::getenv("NESA_FORCE_PERF");
  if (cores < 8 && !(force && std::string(force) == "1"))
    return {Outcome::skip, detail + fmt("; large-task scaling needs >= 8 cores, found %u", cores)};

  BenchConfig large = small;
  large.points_per_leaf = 300;
  large.q = 100;
  large.threads = {1, 8};
  const BenchReport lr = run_benchmark(large);
  const double s8 = lr.runs.back().speedup.value_or(0.0), u8 = lr.runs.back().utilization.value_or(0.0);
  detail += fmt("; P=300,Q=100: S8=%.2f, U8=%.2f", s8, u8);
  return {s8 >= 3.0 && u8 >= 0.85 ? Outcome::pass : Outcome::fail, detail};
}

// 8. Metric arithmetic on published timings.
Verdict metrics_arithmetic() {
  auto round_to = [](double v, double unit) { return std::round(v / unit) * unit; };
  const double s4 = speedup(222, 66), s16 = speedup(1192, 163), g1 = gain(86, 66), g2 = gain(72, 86);
  const bool ok = std::abs(round_to(s4, 0.1) - 3.4) < 1e-9 && std::abs(round_to(s16, 0.1) - 7.3) < 1e-9 &&
                  std::abs(round_to(g1, 0.01) - 0.30) < 1e-9 && std::abs(round_to(g2, 0.01) + 0.16) < 1e-9;
  return {ok ? Outcome::pass : Outcome::fail,
          fmt("S=%.3f, S=%.3f, G=%+.3f, G=%+.3f", s4, s16, g1, g2)};
}

// 9. Exported trace is valid and consistent with the in-memory trace.
Verdict trace_integrity() {
  const Problem pr = wave_problem(20000, 50, 10);
  MvpPlan plan(pr.tree, pr.ops);
  Runtime rt(RuntimeConfig{4, true});
  plan.prepare(bench_charges(20000, 5));
  plan.run(rt);
  const auto trace = rt.trace();
  const auto path = std::filesystem::temp_directory_path() / "nesa_acceptance_trace.json";
  export_trace(trace, path);

  std::ifstream in(path);
  const auto json = nlohmann::json::parse(in);
  bool valid = json.is_array() && json.size() == trace.size();
  double sum_us = 0.0;
  for (const auto& e : json) {
    valid = valid && e.at("ph") == "X" && e.at("pid") == 1 && e.at("ts").get<double>() >= 0.0 &&
            e.at("dur").get<double>() >= 0.0 && e.at("name").is_string() && e.at("tid").is_number_integer();
    sum_us += e.at("dur").get<double>();
  }
  const double internal_us = task_time_ns(trace) / 1e3;
  const bool sum_ok = std::abs(sum_us - internal_us) <= 1.0 * static_cast<double>(trace.size()) * 1e-3 + 1e-6;

  auto parsed = parse_trace(path);
  std::filesystem::remove(path);
  std::map<unsigned, std::vector<TraceEvent>> by_worker;
  for (const auto& e : parsed) by_worker[e.worker].push_back(e);
  bool disjoint = true;
  for (auto& [w, events] : by_worker) {
    std::sort(events.begin(), events.end(), [](auto& a, auto& b) { return a.start_ns < b.start_ns; });
    for (std::size_t k = 1; k < events.size(); ++k) disjoint = disjoint && events[k].start_ns >= events[k - 1].end_ns;
  }
  return {valid && sum_ok && disjoint ? Outcome::pass : Outcome::fail,
          fmt("%zu events, sum %.3f us vs %.3f us, per-worker disjoint: %s", trace.size(), sum_us, internal_us,
              disjoint ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Verdict()>> criteria[] = {
      {"oracle equivalence", oracle_equivalence},
      {"near-field exactness", near_field_exactness},
      {"interaction-list oracle", interaction_oracle},
      {"tree statistics", tree_statistics},
      {"runtime safety/liveness", runtime_stress},
      {"cross-p determinism", cross_p_determinism},
      {"performance", performance},
      {"metrics arithmetic", metrics_arithmetic},
      {"trace integrity", trace_integrity},
  };
  int failures = 0, index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIP";
    if (v.outcome == Outcome::fail) ++failures;
    std::printf("%s %d %s (%.1f s): %s\n", tag, index, name, secs, v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
