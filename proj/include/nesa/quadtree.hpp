#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "nesa/geometry.hpp"

namespace nesa {

using GroupId = std::size_t;

struct TreeParams {
  double points_per_leaf = 50.0;     // P
  std::size_t l0_groups_longest = 4;  // groups along the longest dimension at the coarsest level
};

/// One box of the quadtree. Boxes at level l are addressed by integer
/// coordinates (ix, iy) in [0, 2^l) relative to the root square.
struct Group {
  GroupId id = 0;
  int level = 0;
  std::int64_t ix = 0;
  std::int64_t iy = 0;
  BBox box;
  Point2 center;
  double half_side = 0.0;
  std::optional<GroupId> parent;
  std::vector<GroupId> children;
  // Range into the tree-ordered point array. Groups at every level own a
  // contiguous range because points are sorted along a Z-order curve.
  std::size_t point_begin = 0;
  std::size_t point_end = 0;
  // Same-level groups whose closed boxes intersect this one, self included.
  std::vector<GroupId> adjacent;
  // Same-level far-field partners handled by translation at this level.
  std::vector<GroupId> interaction;

  std::size_t point_count() const { return point_end - point_begin; }
  bool is_leaf() const { return children.empty(); }
};

class Tree {
 public:
  const TreeParams& params() const { return params_; }
  int coarsest_level() const { return l0_; }
  int finest_level() const { return leaf_level_; }
  int level_count() const { return leaf_level_ - l0_ + 1; }
  std::size_t point_count() const { return points_.size(); }

  const Group& group(GroupId id) const { return groups_.at(id); }
  std::span<const Group> groups() const { return groups_; }
  std::span<const Group> level(int l) const {
    const auto k = static_cast<std::size_t>(l - l0_);
    return std::span<const Group>(groups_).subspan(level_begin_.at(k),
                                                   level_begin_.at(k + 1) - level_begin_[k]);
  }
  std::span<const Group> leaves() const { return level(leaf_level_); }

  /// Points in tree order.
  std::span<const Point2> points() const { return points_; }
  std::span<const Point2> points(const Group& g) const {
    return std::span<const Point2>(points_).subspan(g.point_begin, g.point_count());
  }
  /// permutation()[original index] = tree-ordered index.
  std::span<const std::size_t> permutation() const { return permutation_; }

  const BBox& root_box() const { return root_; }

  /// Ancestor of `g` at level `l` (l <= g.level).
  GroupId ancestor(GroupId g, int l) const {
    while (groups_[g].level > l) g = *groups_[g].parent;
    return g;
  }

  std::optional<GroupId> find(int l, std::int64_t ix, std::int64_t iy) const {
    const auto& table = lookup_.at(static_cast<std::size_t>(l - l0_));
    const auto it = table.find(key(ix, iy));
    if (it == table.end()) return std::nullopt;
    return it->second;
  }

 private:
  friend Tree build_tree(std::span<const Point2>, const TreeParams&);

  static std::uint64_t key(std::int64_t ix, std::int64_t iy) {
    return (static_cast<std::uint64_t>(ix) << 32) | static_cast<std::uint64_t>(iy);
  }

  TreeParams params_;
  int l0_ = 0;
  int leaf_level_ = 0;
  BBox root_;
  std::vector<Point2> points_;
  std::vector<std::size_t> permutation_;
  std::vector<Group> groups_;
  std::vector<std::size_t> level_begin_;
  std::vector<std::unordered_map<std::uint64_t, GroupId>> lookup_;
};

inline bool touching(const Group& a, const Group& b) {
  return a.level == b.level && std::abs(a.ix - b.ix) <= 1 && std::abs(a.iy - b.iy) <= 1;
}

namespace detail {

inline constexpr int kMaxLevel = 31;

inline std::uint64_t spread_bits(std::uint64_t v) {
  v &= 0xffffffffULL;
  v = (v | (v << 16)) & 0x0000ffff0000ffffULL;
  v = (v | (v << 8)) & 0x00ff00ff00ff00ffULL;
  v = (v | (v << 4)) & 0x0f0f0f0f0f0f0f0fULL;
  v = (v | (v << 2)) & 0x3333333333333333ULL;
  v = (v | (v << 1)) & 0x5555555555555555ULL;
  return v;
}

inline std::uint64_t compact_bits(std::uint64_t v) {
  v &= 0x5555555555555555ULL;
  v = (v | (v >> 1)) & 0x3333333333333333ULL;
  v = (v | (v >> 2)) & 0x0f0f0f0f0f0f0f0fULL;
  v = (v | (v >> 4)) & 0x00ff00ff00ff00ffULL;
  v = (v | (v >> 8)) & 0x0000ffff0000ffffULL;
  v = (v | (v >> 16)) & 0x00000000ffffffffULL;
  return v;
}

// Box index at the finest representable level; a coordinate exactly on a
// box boundary goes to the box with the larger index.
inline std::uint64_t cell_index(double u) {
  constexpr double scale = static_cast<double>(1ULL << kMaxLevel);
  const double f = std::floor(u * scale);
  const double top = scale - 1.0;
  return static_cast<std::uint64_t>(std::clamp(f, 0.0, top));
}

}  // namespace detail

/// Builds the sparse quadtree with uniform leaf depth.
///
/// The root is the square of side equal to the longest bounding-box extent,
/// anchored at the bounding-box minimum corner. The coarsest level has
/// `l0_groups_longest` boxes per side. A finer level is added only while the
/// average number of points per nonempty box stays >= P; refinement also stops
/// once every box holds a single point, since further levels cannot change
/// the average.
inline Tree build_tree(std::span<const Point2> points, const TreeParams& params) {
  const std::size_t n = points.size();
  const std::size_t l0g = params.l0_groups_longest;
  if (!(params.points_per_leaf >= 1.0)) throw std::invalid_argument("build_tree: P must be >= 1");
  if (l0g < 2 || !std::has_single_bit(l0g)) {
    throw std::invalid_argument("build_tree: l0_groups_longest must be a power of two >= 2");
  }
  if (n < 2) throw std::invalid_argument("build_tree: need at least 2 points");
  if (n < l0g) throw std::invalid_argument("build_tree: fewer points than coarsest-level groups");
  detail::check_distinct(points);

  Tree tree;
  tree.params_ = params;
  tree.l0_ = std::countr_zero(l0g);
  const int l0 = tree.l0_;

  const BBox bbox = bounding_box(points);
  const double side = bbox.longest_extent();
  tree.root_ = BBox{bbox.min, {bbox.min.x + side, bbox.min.y + side}};

  // Sort along the Z-order curve of the finest representable level.
  std::vector<std::uint64_t> code(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (points[i].x - bbox.min.x) / side;
    const double v = (points[i].y - bbox.min.y) / side;
    code[i] = (detail::spread_bits(detail::cell_index(u)) << 1) |
              detail::spread_bits(detail::cell_index(v));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return code[a] < code[b]; });

  tree.points_.resize(n);
  tree.permutation_.resize(n);
  std::vector<std::uint64_t> sorted_code(n);
  for (std::size_t k = 0; k < n; ++k) {
    tree.points_[k] = points[order[k]];
    tree.permutation_[order[k]] = k;
    sorted_code[k] = code[order[k]];
  }

  auto level_key = [&](std::size_t k, int l) {
    return sorted_code[k] >> (2 * (detail::kMaxLevel - l));
  };
  auto count_groups = [&](int l) {
    std::size_t count = 1;
    for (std::size_t k = 1; k < n; ++k)
      if (level_key(k, l) != level_key(k - 1, l)) ++count;
    return count;
  };

  int leaf_level = l0;
  std::size_t current = count_groups(l0);
  while (leaf_level < detail::kMaxLevel && current < n) {
    const std::size_t next = count_groups(leaf_level + 1);
    if (static_cast<double>(n) / static_cast<double>(next) < params.points_per_leaf) break;
    ++leaf_level;
    current = next;
  }
  tree.leaf_level_ = leaf_level;

  // Materialize groups level by level, coarse to fine.
  const int levels = leaf_level - l0 + 1;
  tree.level_begin_.assign(1, 0);
  tree.lookup_.resize(static_cast<std::size_t>(levels));
  for (int l = l0; l <= leaf_level; ++l) {
    const double box_side = side / static_cast<double>(1ULL << l);
    const auto depth = static_cast<std::size_t>(l - l0);
    std::size_t begin = 0;
    while (begin < n) {
      std::size_t end = begin + 1;
      while (end < n && level_key(end, l) == level_key(begin, l)) ++end;
      const std::uint64_t morton = level_key(begin, l);
      Group g;
      g.id = tree.groups_.size();
      g.level = l;
      g.ix = static_cast<std::int64_t>(detail::compact_bits(morton >> 1));
      g.iy = static_cast<std::int64_t>(detail::compact_bits(morton));
      g.box.min = {bbox.min.x + box_side * static_cast<double>(g.ix),
                   bbox.min.y + box_side * static_cast<double>(g.iy)};
      g.box.max = {g.box.min.x + box_side, g.box.min.y + box_side};
      g.half_side = 0.5 * box_side;
      g.center = {g.box.min.x + g.half_side, g.box.min.y + g.half_side};
      g.point_begin = begin;
      g.point_end = end;
      if (l > l0) {
        const GroupId parent = *tree.find(l - 1, g.ix >> 1, g.iy >> 1);
        g.parent = parent;
        tree.groups_[parent].children.push_back(g.id);
      }
      tree.lookup_[depth].emplace(Tree::key(g.ix, g.iy), g.id);
      tree.groups_.push_back(std::move(g));
      begin = end;
    }
    tree.level_begin_.push_back(tree.groups_.size());
  }

  // Adjacency: same-level boxes sharing an edge, a corner, or identity.
  for (Group& g : tree.groups_) {
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        if (auto other = tree.find(g.level, g.ix + dx, g.iy + dy)) g.adjacent.push_back(*other);
    std::sort(g.adjacent.begin(), g.adjacent.end());
  }

  // Interaction lists: at the coarsest level every non-touching group; below,
  // the non-touching children of the parent's adjacent groups.
  for (Group& g : tree.groups_) {
    if (g.level == l0) {
      for (const Group& other : tree.level(l0))
        if (!touching(g, other)) g.interaction.push_back(other.id);
    } else {
      for (GroupId pn : tree.groups_[*g.parent].adjacent)
        for (GroupId c : tree.groups_[pn].children)
          if (!touching(g, tree.groups_[c])) g.interaction.push_back(c);
      std::sort(g.interaction.begin(), g.interaction.end());
    }
  }
  return tree;
}

/// Near-field partners of a leaf, self included.
inline std::span<const GroupId> neighbor_list(const Tree& tree, GroupId g) {
  const Group& group = tree.group(g);
  if (!group.is_leaf() || group.level != tree.finest_level()) {
    throw std::invalid_argument("neighbor_list: group is not a leaf");
  }
  return group.adjacent;
}

inline std::span<const GroupId> interaction_list(const Tree& tree, GroupId g) {
  return tree.group(g).interaction;
}

struct TreeStats {
  int coarsest_level = 0;
  int finest_level = 0;
  int active_levels = 0;
  std::vector<std::size_t> groups_per_level;  // N_l for l = l0..L
  std::size_t leaf_count = 0;                 // N_L
  std::size_t child_count = 0;                // N_c = sum_{l > l0} N_l
  double mean_children = 0.0;                 // over groups with children
  double mean_neighbors = 0.0;                // over leaves, self included
  double mean_interaction = 0.0;              // over all groups at all levels
  std::vector<double> mean_interaction_per_level;
  std::size_t near_pairs = 0;
  std::size_t interaction_pairs = 0;
};

inline TreeStats tree_stats(const Tree& tree) {
  TreeStats s;
  s.coarsest_level = tree.coarsest_level();
  s.finest_level = tree.finest_level();
  s.active_levels = tree.level_count();
  std::size_t parents = 0;
  for (int l = s.coarsest_level; l <= s.finest_level; ++l) {
    const auto groups = tree.level(l);
    s.groups_per_level.push_back(groups.size());
    if (l > s.coarsest_level) s.child_count += groups.size();
    std::size_t pairs = 0;
    for (const Group& g : groups) {
      pairs += g.interaction.size();
      if (!g.is_leaf()) ++parents;
    }
    s.interaction_pairs += pairs;
    s.mean_interaction_per_level.push_back(static_cast<double>(pairs) /
                                           static_cast<double>(groups.size()));
  }
  s.leaf_count = tree.leaves().size();
  for (const Group& g : tree.leaves()) s.near_pairs += g.adjacent.size();
  s.mean_children = parents ? static_cast<double>(s.child_count) / static_cast<double>(parents) : 0.0;
  s.mean_neighbors = static_cast<double>(s.near_pairs) / static_cast<double>(s.leaf_count);
  s.mean_interaction =
      static_cast<double>(s.interaction_pairs) / static_cast<double>(tree.groups().size());
  return s;
}

}  // namespace nesa
