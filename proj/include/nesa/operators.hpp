#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "nesa/linalg.hpp"
#include "nesa/quadtree.hpp"

namespace nesa {

/// Equivalent-source construction parameters. Radii are ratios of the group
/// half-side h.
///
/// Outgoing: Q equivalent sources on a circle of radius outgoing_aux * h,
/// matched to the true field on 2Q check points at outgoing_check * h.
/// Incoming: Q fictitious sources on a circle of radius incoming_aux * h,
/// matched to the incoming field on 2Q check points at incoming_check * h.
struct NesaParams {
  std::size_t q = 10;
  std::size_t check_oversampling = 2;
  double outgoing_aux = 1.5;
  double outgoing_check = 2.4;
  double incoming_check = 1.5;
  double incoming_aux = 2.4;
  double pinv_cutoff = 1e-12;

  std::size_t check_count() const { return check_oversampling * q; }
};

inline void validate(const NesaParams& p) {
  const double box_radius = std::sqrt(2.0);
  if (p.q < 3) throw std::invalid_argument("NesaParams: Q must be >= 3");
  if (p.check_oversampling < 1) throw std::invalid_argument("NesaParams: oversampling must be >= 1");
  if (!(p.outgoing_aux > box_radius && p.outgoing_check > p.outgoing_aux)) {
    throw std::invalid_argument("NesaParams: need sqrt(2) < outgoing aux < outgoing check");
  }
  if (!(p.incoming_check > box_radius && p.incoming_aux > p.incoming_check)) {
    throw std::invalid_argument("NesaParams: need sqrt(2) < incoming check < incoming aux");
  }
  // Same-level well-separated boxes have centers at least 4h apart.
  if (!(p.outgoing_check < 4.0 - p.incoming_check && p.outgoing_aux + p.incoming_check < 4.0)) {
    throw std::invalid_argument("NesaParams: circles overlap for well-separated groups");
  }
  if (!(p.pinv_cutoff > 0.0 && p.pinv_cutoff < 1.0)) {
    throw std::invalid_argument("NesaParams: pinv cutoff must lie in (0, 1)");
  }
}

struct GroupAux {
  std::vector<Point2> outgoing_aux;    // Q
  std::vector<Point2> outgoing_check;  // 2Q
  std::vector<Point2> incoming_aux;    // Q
  std::vector<Point2> incoming_check;  // 2Q
};

inline GroupAux build_group_aux(Point2 center, double half_side, const NesaParams& params) {
  validate(params);
  if (!(half_side > 0.0)) throw std::invalid_argument("build_group_aux: half side must be > 0");
  return {circle_points(center, params.outgoing_aux * half_side, params.q),
          circle_points(center, params.outgoing_check * half_side, params.check_count()),
          circle_points(center, params.incoming_aux * half_side, params.q),
          circle_points(center, params.incoming_check * half_side, params.check_count())};
}

inline GroupAux build_group_aux(const Group& g, const NesaParams& params) {
  return build_group_aux(g.center, g.half_side, params);
}

/// Pseudoinverses of the self-interaction matrices of the aux circles. They
/// depend only on the box size, so one pair serves every group of a level.
struct LevelFit {
  DenseMatrix outgoing;  // pinv(G(T_out, A_out)), Q x 2Q
  DenseMatrix incoming;  // pinv(G(T_in, A_in)), Q x 2Q
};

inline LevelFit build_level_fit(double half_side, const NesaParams& params) {
  const GroupAux aux = build_group_aux(Point2{}, half_side, params);
  return {pinv(kernel_matrix(aux.outgoing_check, aux.outgoing_aux), params.pinv_cutoff),
          pinv(kernel_matrix(aux.incoming_check, aux.incoming_aux), params.pinv_cutoff)};
}

/// V = pinv(G(T_out, A_out)) G(T_out, X); Q x n.
inline DenseMatrix build_radiation(const GroupAux& aux, const LevelFit& fit,
                                   std::span<const Point2> points) {
  if (points.empty()) throw std::invalid_argument("build_radiation: empty leaf");
  return matmul(fit.outgoing, kernel_matrix(aux.outgoing_check, points));
}

/// C = pinv(G(T_out_parent, A_out_parent)) G(T_out_parent, A_out_child); Q x Q.
inline DenseMatrix build_source_transfer(const GroupAux& parent, const LevelFit& parent_fit,
                                         const GroupAux& child) {
  return matmul(parent_fit.outgoing, kernel_matrix(parent.outgoing_check, child.outgoing_aux));
}

/// D = pinv(G(T_in_target, A_in_target)) G(T_in_target, A_out_source); Q x Q.
inline DenseMatrix build_translation(const Group& target, const GroupAux& target_aux,
                                     const LevelFit& target_fit, const Group& source,
                                     const GroupAux& source_aux) {
  const double min_separation = 4.0 * target.half_side * (1.0 - 1e-12);
  if (target.level != source.level || touching(target, source) ||
      distance(target.center, source.center) < min_separation) {
    throw std::invalid_argument("build_translation: groups are not well separated");
  }
  return matmul(target_fit.incoming,
                kernel_matrix(target_aux.incoming_check, source_aux.outgoing_aux));
}

/// B = pinv(G(T_in_child, A_in_child)) G(T_in_child, A_in_parent); Q x Q.
inline DenseMatrix build_potential_transfer(const GroupAux& child, const LevelFit& child_fit,
                                            const GroupAux& parent) {
  return matmul(child_fit.incoming, kernel_matrix(child.incoming_check, parent.incoming_aux));
}

/// U = G(X, A_in); n x Q.
inline DenseMatrix build_reception(const GroupAux& aux, std::span<const Point2> points) {
  return kernel_matrix(points, aux.incoming_aux);
}

/// Dense kernel block between two leaves; zero diagonal for the self block.
inline DenseMatrix build_near_block(const Tree& tree, GroupId target, GroupId source) {
  const Group& a = tree.group(target);
  const Group& b = tree.group(source);
  if (!touching(a, b)) throw std::invalid_argument("build_near_block: groups are not neighbors");
  return kernel_matrix(tree.points(a), tree.points(b), target == source);
}

/// Every operator of the hierarchical product, indexed by group id.
struct OperatorSet {
  NesaParams params;
  std::vector<DenseMatrix> radiation;           // leaves: V, Q x n
  std::vector<DenseMatrix> reception;           // leaves: U, n x Q
  std::vector<DenseMatrix> source_transfer;     // non-root: C from child to parent
  std::vector<DenseMatrix> potential_transfer;  // non-root: B from parent to child
  std::vector<std::vector<DenseMatrix>> translation;  // aligned with Group::interaction
  std::vector<std::vector<DenseMatrix>> near;         // leaves: aligned with Group::adjacent

  /// Stored matrix entries, split into near and far field.
  std::size_t near_entries() const {
    std::size_t total = 0;
    for (const auto& row : near)
      for (const auto& m : row) total += m.size();
    return total;
  }
  std::size_t far_entries() const {
    std::size_t total = 0;
    for (const auto* set : {&radiation, &reception, &source_transfer, &potential_transfer})
      for (const auto& m : *set) total += m.size();
    for (const auto& row : translation)
      for (const auto& m : row) total += m.size();
    return total;
  }
};

inline OperatorSet build_all(const Tree& tree, const NesaParams& params) {
  validate(params);
  const auto groups = tree.groups();
  const std::size_t count = groups.size();

  std::vector<LevelFit> fits;
  for (int l = tree.coarsest_level(); l <= tree.finest_level(); ++l)
    fits.push_back(build_level_fit(tree.level(l).front().half_side, params));
  auto fit_of = [&](const Group& g) -> const LevelFit& {
    return fits[static_cast<std::size_t>(g.level - tree.coarsest_level())];
  };

  std::vector<GroupAux> aux;
  aux.reserve(count);
  for (const Group& g : groups) aux.push_back(build_group_aux(g, params));

  OperatorSet ops;
  ops.params = params;
  ops.radiation.resize(count);
  ops.reception.resize(count);
  ops.source_transfer.resize(count);
  ops.potential_transfer.resize(count);
  ops.translation.resize(count);
  ops.near.resize(count);

  for (const Group& g : groups) {
    if (g.parent) {
      const Group& p = tree.group(*g.parent);
      ops.source_transfer[g.id] = build_source_transfer(aux[p.id], fit_of(p), aux[g.id]);
      ops.potential_transfer[g.id] = build_potential_transfer(aux[g.id], fit_of(g), aux[p.id]);
    }
    for (GroupId b : g.interaction) {
      ops.translation[g.id].push_back(
          build_translation(g, aux[g.id], fit_of(g), tree.group(b), aux[b]));
    }
  }
  for (const Group& g : tree.leaves()) {
    ops.radiation[g.id] = build_radiation(aux[g.id], fit_of(g), tree.points(g));
    ops.reception[g.id] = build_reception(aux[g.id], tree.points(g));
    for (GroupId b : g.adjacent) ops.near[g.id].push_back(build_near_block(tree, g.id, b));
  }
  return ops;
}

}  // namespace nesa
