#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "nesa/linalg.hpp"
#include "nesa/operators.hpp"
#include "nesa/quadtree.hpp"
#include "nesa/runtime.hpp"

namespace nesa {

enum class MvpPart { near_field, far_field, both };

/// Working vectors of one product, all in tree order. `s` and `o` hold Q
/// entries per group, addressed by group id.
struct StageVectors {
  Vector q;
  Vector phi;
  Vector s;  // equivalent sources
  Vector o;  // incoming representation
};

/// The hierarchical product of a built tree and operator set, expressed as
/// one task per small dense product.
///
/// Submission order: near-field blocks, then radiation, source transfer
/// (finest to coarsest), translation (all levels), potential transfer
/// (coarsest to finest) and reception. Stage ordering comes only from the
/// registered accesses: reads of inputs and adds into outputs, with one
/// handle per leaf slice of q and phi and one per group for s and o.
class MvpPlan {
 public:
  MvpPlan(const Tree& tree, const OperatorSet& ops) : tree_(tree), ops_(ops), q_(ops.params.q) {
    const std::size_t groups = tree.groups().size();
    if (ops.radiation.size() != groups) throw std::invalid_argument("MvpPlan: operator set does not match tree");
    vectors_.q.assign(tree.point_count(), 0.0);
    vectors_.phi.assign(tree.point_count(), 0.0);
    vectors_.s.assign(groups * q_, 0.0);
    vectors_.o.assign(groups * q_, 0.0);
  }

  const Tree& tree() const { return tree_; }
  const StageVectors& vectors() const { return vectors_; }

  /// Loads charges given in original point order and zeroes every output.
  void prepare(std::span<const double> q) {
    if (q.size() != tree_.point_count()) throw std::invalid_argument("mvp: charge vector size mismatch");
    const auto perm = tree_.permutation();
    for (std::size_t i = 0; i < q.size(); ++i) vectors_.q[perm[i]] = q[i];
    std::fill(vectors_.phi.begin(), vectors_.phi.end(), 0.0);
    std::fill(vectors_.s.begin(), vectors_.s.end(), 0.0);
    std::fill(vectors_.o.begin(), vectors_.o.end(), 0.0);
  }

  /// Potentials in original point order.
  Vector result() const {
    Vector phi(tree_.point_count());
    const auto perm = tree_.permutation();
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = vectors_.phi[perm[i]];
    return phi;
  }

  void submit_near_field(Runtime& rt) { emit_near(RuntimeSink{*this, rt}); }
  void submit_far_field(Runtime& rt) { emit_far(RuntimeSink{*this, rt}); }

  /// Submits the selected part and waits for completion.
  void run(Runtime& rt, MvpPart part = MvpPart::both) {
    if (part != MvpPart::far_field) submit_near_field(rt);
    if (part != MvpPart::near_field) submit_far_field(rt);
    rt.barrier();
  }

  /// Executes the same task bodies immediately, in submission order.
  void run_serial(MvpPart part = MvpPart::both) {
    const auto sink = [](TaskKind, std::initializer_list<SlotAccess>, const std::function<void()>& body) {
      body();
    };
    if (part != MvpPart::far_field) emit_near(sink);
    if (part != MvpPart::near_field) emit_far(sink);
  }

  std::map<TaskKind, std::size_t> task_counts(MvpPart part = MvpPart::both) const {
    std::map<TaskKind, std::size_t> counts;
    const auto sink = [&](TaskKind kind, std::initializer_list<SlotAccess>, const std::function<void()>&) {
      ++counts[kind];
    };
    auto& self = const_cast<MvpPlan&>(*this);
    if (part != MvpPart::far_field) self.emit_near(sink);
    if (part != MvpPart::near_field) self.emit_far(sink);
    return counts;
  }

 private:
  enum class Slot { q, phi, s, o };
  struct SlotAccess {
    Slot slot;
    GroupId group;
    AccessMode mode;
  };

  struct RuntimeSink {
    MvpPlan& plan;
    Runtime& rt;
    void operator()(TaskKind kind, std::initializer_list<SlotAccess> accesses,
                    std::function<void()> body) const {
      plan.bind(rt);
      Task task{kind, {}, std::move(body)};
      for (const SlotAccess& a : accesses) task.accesses.push_back({plan.handle(a.slot, a.group), a.mode});
      rt.submit(std::move(task));
    }
  };

  void bind(Runtime& rt) {
    if (bound_ == rt.instance_id()) return;
    const std::size_t groups = tree_.groups().size();
    for (auto& set : handles_) {
      set.clear();
      set.reserve(groups);
      for (std::size_t g = 0; g < groups; ++g) set.push_back(rt.create_handle());
    }
    bound_ = rt.instance_id();
  }

  Handle handle(Slot slot, GroupId g) const { return handles_[static_cast<std::size_t>(slot)][g]; }

  std::span<double> leaf_slice(Vector& v, const Group& g) {
    return std::span<double>(v).subspan(g.point_begin, g.point_count());
  }
  std::span<double> group_slice(Vector& v, GroupId g) {
    return std::span<double>(v).subspan(g * q_, q_);
  }

  template <class Sink>
  void emit_near(Sink&& sink) {
    for (const Group& a : tree_.leaves()) {
      const auto phi = leaf_slice(vectors_.phi, a);
      for (std::size_t k = 0; k < a.adjacent.size(); ++k) {
        const Group& b = tree_.group(a.adjacent[k]);
        const DenseMatrix* block = &ops_.near[a.id][k];
        const auto q = leaf_slice(vectors_.q, b);
        sink(TaskKind::near, {{Slot::q, b.id, AccessMode::read}, {Slot::phi, a.id, AccessMode::add}},
             [block, q, phi] { gemv(*block, q, phi, true); });
      }
    }
  }

  template <class Sink>
  void emit_far(Sink&& sink) {
    const int l0 = tree_.coarsest_level();
    const int leaf_level = tree_.finest_level();

    for (const Group& b : tree_.leaves()) {
      const DenseMatrix* v = &ops_.radiation[b.id];
      const auto q = leaf_slice(vectors_.q, b);
      const auto s = group_slice(vectors_.s, b.id);
      sink(TaskKind::radiation, {{Slot::q, b.id, AccessMode::read}, {Slot::s, b.id, AccessMode::add}},
           [v, q, s] { gemv(*v, q, s, true); });
    }

    for (int l = leaf_level; l > l0; --l) {
      for (const Group& child : tree_.level(l)) {
        const GroupId parent = *child.parent;
        const DenseMatrix* c = &ops_.source_transfer[child.id];
        const auto src = group_slice(vectors_.s, child.id);
        const auto dst = group_slice(vectors_.s, parent);
        sink(TaskKind::source_transfer,
             {{Slot::s, child.id, AccessMode::read}, {Slot::s, parent, AccessMode::add}},
             [c, src, dst] { gemv(*c, src, dst, true); });
      }
    }

    for (int l = l0; l <= leaf_level; ++l) {
      for (const Group& a : tree_.level(l)) {
        const auto o = group_slice(vectors_.o, a.id);
        for (std::size_t k = 0; k < a.interaction.size(); ++k) {
          const GroupId b = a.interaction[k];
          const DenseMatrix* d = &ops_.translation[a.id][k];
          const auto s = group_slice(vectors_.s, b);
          sink(TaskKind::translation, {{Slot::s, b, AccessMode::read}, {Slot::o, a.id, AccessMode::add}},
               [d, s, o] { gemv(*d, s, o, true); });
        }
      }
    }

    for (int l = l0 + 1; l <= leaf_level; ++l) {
      for (const Group& child : tree_.level(l)) {
        const GroupId parent = *child.parent;
        const DenseMatrix* bmat = &ops_.potential_transfer[child.id];
        const auto src = group_slice(vectors_.o, parent);
        const auto dst = group_slice(vectors_.o, child.id);
        sink(TaskKind::potential_transfer,
             {{Slot::o, parent, AccessMode::read}, {Slot::o, child.id, AccessMode::add}},
             [bmat, src, dst] { gemv(*bmat, src, dst, true); });
      }
    }

    for (const Group& a : tree_.leaves()) {
      const DenseMatrix* u = &ops_.reception[a.id];
      const auto o = group_slice(vectors_.o, a.id);
      const auto phi = leaf_slice(vectors_.phi, a);
      sink(TaskKind::reception, {{Slot::o, a.id, AccessMode::read}, {Slot::phi, a.id, AccessMode::add}},
           [u, o, phi] { gemv(*u, o, phi, true); });
    }
  }

  const Tree& tree_;
  const OperatorSet& ops_;
  std::size_t q_;
  StageVectors vectors_;
  std::uint64_t bound_ = 0;
  std::array<std::vector<Handle>, 4> handles_;
};

/// Parallel product; phi in original point order.
inline Vector mvp(const Tree& tree, const OperatorSet& ops, std::span<const double> q, Runtime& rt,
                  MvpPart part = MvpPart::both) {
  MvpPlan plan(tree, ops);
  plan.prepare(q);
  plan.run(rt, part);
  return plan.result();
}

inline Vector mvp_serial(const Tree& tree, const OperatorSet& ops, std::span<const double> q,
                         MvpPart part = MvpPart::both) {
  MvpPlan plan(tree, ops);
  plan.prepare(q);
  plan.run_serial(part);
  return plan.result();
}

}  // namespace nesa
