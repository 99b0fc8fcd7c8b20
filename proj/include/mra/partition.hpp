#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mra/geometry.hpp"

namespace mra {

/// Default knot offset ratio; irrational so knots of different levels never coincide.
inline constexpr double kDefaultOffset = std::numbers::e / 100.0;

/// Pushes the top and right boundaries outward by 1% of the extent.
BoundingBox extend_domain(const BoundingBox& box);

/// Children of `box` in split order. J = 4 gives quadrants ordered by (y, x);
/// J = 2 halves the strictly longer side (x on ties).
std::vector<BoundingBox> split_region(const BoundingBox& box, int partitions);

/// Grid dimensions (bars along x, bars along y) used for a knot budget r.
struct KnotGrid {
  int nx = 0;
  int ny = 0;
  int count() const { return nx * ny; }
};
KnotGrid knot_grid(int r);

/// Knots on the ceil(sqrt r) x floor(r / ceil(sqrt r)) grid, row-major by (y, x).
PointList place_knots(const BoundingBox& box, int r, double offset);

/// Smallest M with n / J^(M-1) <= r.
int default_levels(std::size_t n, int partitions, int r);

/// Level and child path (j_2, ..., j_m), each j in 1..J.
struct RegionId {
  int level = 1;
  std::vector<int> path;
  std::string to_string() const;
};

struct Region {
  int level = 1;
  BoundingBox box;
  PointList knots;
  /// Indices into the observation list the tree was built from (finest level only).
  std::vector<std::size_t> observations;
};

struct TreeOptions {
  int partitions = 2;
  int knots = 16;
  std::optional<int> levels;  // nullopt selects default_levels
  double offset = kDefaultOffset;
};

/// The multi-resolution region hierarchy. Regions are stored level by level;
/// within a level they run left to right, so the finest level is in the same
/// order as a depth-first traversal. Immutable once built.
class PartitionTree {
 public:
  /// `extent`, when given, must cover every observation; the level-1 domain is
  /// its 1% extension. Otherwise the observations' bounding box is used.
  static PartitionTree build(const PointList& observations, const TreeOptions& options,
                             const std::optional<BoundingBox>& extent = std::nullopt);

  int partitions() const { return partitions_; }
  int levels() const { return levels_; }
  int requested_knots() const { return requested_knots_; }
  int knots_per_region() const { return knots_per_region_; }
  double offset() const { return offset_; }
  const BoundingBox& domain() const { return regions_.front().box; }

  std::size_t region_count() const { return regions_.size(); }
  std::size_t level_begin(int level) const;
  std::size_t level_size(int level) const;
  std::size_t finest_count() const { return level_size(levels_); }
  std::size_t finest_region(std::size_t finest_index) const {
    return level_begin(levels_) + finest_index;
  }

  const Region& region(std::size_t id) const { return regions_[id]; }
  int level_of(std::size_t id) const { return regions_[id].level; }
  bool is_finest(std::size_t id) const { return regions_[id].level == levels_; }
  std::size_t parent(std::size_t id) const;
  std::size_t first_child(std::size_t id) const;
  std::vector<std::size_t> children(std::size_t id) const;
  /// Ancestors ordered from level 1 down to level(id) - 1.
  std::vector<std::size_t> ancestors(std::size_t id) const;
  /// Ancestor of `id` at `level` (id itself when level == level_of(id)).
  std::size_t ancestor_at(std::size_t id, int level) const;
  RegionId region_id(std::size_t id) const;

  /// Region at `level` containing p, or nullopt outside the domain.
  std::optional<std::size_t> locate(Point p, int level) const;
  std::optional<std::size_t> locate(Point p) const { return locate(p, levels_); }

  std::size_t input_count() const { return input_count_; }
  std::size_t retained_count() const { return input_count_ - eliminated_.size(); }
  const std::vector<std::size_t>& eliminated() const { return eliminated_; }
  /// Observation counts of the finest regions, in canonical order.
  std::vector<std::size_t> finest_counts() const;

 private:
  PartitionTree() = default;

  int partitions_ = 2;
  int levels_ = 1;
  int requested_knots_ = 0;
  int knots_per_region_ = 0;
  double offset_ = kDefaultOffset;
  std::size_t input_count_ = 0;
  std::vector<Region> regions_;
  std::vector<std::size_t> eliminated_;
};

/// Number of pre-finest knots that coincide, up to 1e-9 of the domain extent,
/// with an earlier knot.
std::size_t count_knot_collisions(const PartitionTree& tree);

/// Human-readable structure dump (the build_structure_only artifact).
void write_structure_report(const PartitionTree& tree, std::ostream& out);
void write_structure_report(const PartitionTree& tree, const std::string& path);

}  // namespace mra
