#include "mra/partition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_set>

#include "mra/errors.hpp"

namespace mra {

BoundingBox bounding_box(const PointList& points) {
  if (points.empty()) throw StructuralError("bounding_box: empty point list");
  BoundingBox box{points[0].x, points[0].x, points[0].y, points[0].y};
  for (const Point& p : points) {
    box.x_min = std::min(box.x_min, p.x);
    box.x_max = std::max(box.x_max, p.x);
    box.y_min = std::min(box.y_min, p.y);
    box.y_max = std::max(box.y_max, p.y);
  }
  return box;
}

BoundingBox extend_domain(const BoundingBox& box) {
  if (!(box.x_max > box.x_min) || !(box.y_max > box.y_min)) {
    std::ostringstream msg;
    msg << std::setprecision(17) << "degenerate domain [" << box.x_min << ", " << box.x_max
        << "] x [" << box.y_min << ", " << box.y_max
        << "]: data must span a positive extent in both coordinates";
    throw StructuralError(msg.str());
  }
  BoundingBox out = box;
  out.x_max = box.x_max + 0.01 * (box.x_max - box.x_min);
  out.y_max = box.y_max + 0.01 * (box.y_max - box.y_min);
  return out;
}

std::vector<BoundingBox> split_region(const BoundingBox& box, int partitions) {
  const double x_mid = box.x_min + 0.5 * (box.x_max - box.x_min);
  const double y_mid = box.y_min + 0.5 * (box.y_max - box.y_min);
  if (partitions == 4) {
    return {
        {box.x_min, x_mid, box.y_min, y_mid},
        {x_mid, box.x_max, box.y_min, y_mid},
        {box.x_min, x_mid, y_mid, box.y_max},
        {x_mid, box.x_max, y_mid, box.y_max},
    };
  }
  if (partitions == 2) {
    if (box.height() > box.width()) {
      return {{box.x_min, box.x_max, box.y_min, y_mid}, {box.x_min, box.x_max, y_mid, box.y_max}};
    }
    return {{box.x_min, x_mid, box.y_min, box.y_max}, {x_mid, box.x_max, box.y_min, box.y_max}};
  }
  throw ConfigError("NUM_PARTITIONS_J requires to be either 2 or 4, got " +
                    std::to_string(partitions));
}

KnotGrid knot_grid(int r) {
  if (r < 1) throw ConfigError("NUM_KNOTS_r must be at least 1, got " + std::to_string(r));
  int nx = 1;
  while (nx * nx < r) ++nx;
  return {nx, r / nx};
}

namespace {

std::vector<double> grid_bars(double lo, double hi, int n, double offset) {
  const double extent = hi - lo;
  if (n == 1) return {lo + 0.5 * extent};
  std::vector<double> bars(static_cast<std::size_t>(n));
  const double first = lo + offset * extent;
  const double spacing = extent * (1.0 - 2.0 * offset) / (n - 1);
  for (int i = 0; i < n; ++i) bars[static_cast<std::size_t>(i)] = first + i * spacing;
  return bars;
}

}  // namespace

PointList place_knots(const BoundingBox& box, int r, double offset) {
  const KnotGrid grid = knot_grid(r);
  if (!(offset > 0.0 && offset < 0.5)) {
    throw ConfigError("OFFSET must lie in (0, 0.5), got " + std::to_string(offset));
  }
  const auto xs = grid_bars(box.x_min, box.x_max, grid.nx, offset);
  const auto ys = grid_bars(box.y_min, box.y_max, grid.ny, offset);
  PointList knots;
  knots.reserve(static_cast<std::size_t>(grid.count()));
  for (double y : ys)
    for (double x : xs) knots.push_back({x, y});
  return knots;
}

int default_levels(std::size_t n, int partitions, int r) {
  if (n <= static_cast<std::size_t>(r)) return 1;
  double capacity = static_cast<double>(r);
  int levels = 1;
  while (static_cast<double>(n) > capacity) {
    capacity *= partitions;
    ++levels;
  }
  return levels;
}

std::string RegionId::to_string() const {
  std::string out = "1";
  for (int j : path) out += "," + std::to_string(j);
  return out;
}

namespace {

std::size_t ipow(std::size_t base, int exp) {
  std::size_t out = 1;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

struct PointHash {
  std::size_t operator()(Point p) const noexcept {
    const auto hx = std::bit_cast<std::uint64_t>(p.x);
    const auto hy = std::bit_cast<std::uint64_t>(p.y);
    return std::hash<std::uint64_t>{}(hx ^ (hy * 0x9E3779B97F4A7C15ull));
  }
};

}  // namespace

std::size_t PartitionTree::level_begin(int level) const {
  return (ipow(static_cast<std::size_t>(partitions_), level - 1) - 1) /
         static_cast<std::size_t>(partitions_ - 1);
}

std::size_t PartitionTree::level_size(int level) const {
  return ipow(static_cast<std::size_t>(partitions_), level - 1);
}

std::size_t PartitionTree::parent(std::size_t id) const {
  const int level = regions_[id].level;
  if (level == 1) throw StructuralError("root region has no parent");
  const std::size_t in_level = id - level_begin(level);
  return level_begin(level - 1) + in_level / static_cast<std::size_t>(partitions_);
}

std::size_t PartitionTree::first_child(std::size_t id) const {
  const int level = regions_[id].level;
  if (level == levels_) throw StructuralError("finest region has no children");
  const std::size_t in_level = id - level_begin(level);
  return level_begin(level + 1) + in_level * static_cast<std::size_t>(partitions_);
}

std::vector<std::size_t> PartitionTree::children(std::size_t id) const {
  if (is_finest(id)) return {};
  std::vector<std::size_t> out(static_cast<std::size_t>(partitions_));
  const std::size_t first = first_child(id);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = first + j;
  return out;
}

std::size_t PartitionTree::ancestor_at(std::size_t id, int level) const {
  const int own = regions_[id].level;
  std::size_t in_level = id - level_begin(own);
  for (int l = own; l > level; --l) in_level /= static_cast<std::size_t>(partitions_);
  return level_begin(level) + in_level;
}

std::vector<std::size_t> PartitionTree::ancestors(std::size_t id) const {
  const int level = regions_[id].level;
  std::vector<std::size_t> out(static_cast<std::size_t>(level - 1));
  for (int l = 1; l < level; ++l) out[static_cast<std::size_t>(l - 1)] = ancestor_at(id, l);
  return out;
}

RegionId PartitionTree::region_id(std::size_t id) const {
  RegionId rid;
  rid.level = regions_[id].level;
  std::size_t in_level = id - level_begin(rid.level);
  rid.path.resize(static_cast<std::size_t>(rid.level - 1));
  for (int k = rid.level - 2; k >= 0; --k) {
    rid.path[static_cast<std::size_t>(k)] =
        static_cast<int>(in_level % static_cast<std::size_t>(partitions_)) + 1;
    in_level /= static_cast<std::size_t>(partitions_);
  }
  return rid;
}

std::optional<std::size_t> PartitionTree::locate(Point p, int level) const {
  if (!regions_.front().box.contains(p)) return std::nullopt;
  std::size_t id = 0;
  for (int l = 1; l < level; ++l) {
    const std::size_t first = first_child(id);
    bool found = false;
    for (int j = 0; j < partitions_; ++j) {
      if (regions_[first + static_cast<std::size_t>(j)].box.contains(p)) {
        id = first + static_cast<std::size_t>(j);
        found = true;
        break;
      }
    }
    if (!found) return std::nullopt;
  }
  return id;
}

std::vector<std::size_t> PartitionTree::finest_counts() const {
  std::vector<std::size_t> counts(finest_count());
  for (std::size_t i = 0; i < counts.size(); ++i)
    counts[i] = regions_[finest_region(i)].observations.size();
  return counts;
}

PartitionTree PartitionTree::build(const PointList& observations, const TreeOptions& options,
                                   const std::optional<BoundingBox>& extent) {
  if (options.partitions != 2 && options.partitions != 4) {
    throw ConfigError("NUM_PARTITIONS_J requires to be either 2 or 4, got " +
                      std::to_string(options.partitions));
  }
  if (options.knots < 1) {
    throw ConfigError("NUM_KNOTS_r must be at least 1, got " + std::to_string(options.knots));
  }
  if (!(options.offset > 0.0 && options.offset < 0.5)) {
    throw ConfigError("OFFSET must lie in (0, 0.5)");
  }
  if (options.levels && *options.levels < 1) {
    throw ConfigError("NUM_LEVELS_M must be a positive integer, got " +
                      std::to_string(*options.levels));
  }
  if (observations.empty()) throw StructuralError("no observations to build the structure from");

  PartitionTree tree;
  tree.partitions_ = options.partitions;
  tree.requested_knots_ = options.knots;
  tree.knots_per_region_ = knot_grid(options.knots).count();
  tree.offset_ = options.offset;
  tree.input_count_ = observations.size();
  tree.levels_ = options.levels ? *options.levels
                                : default_levels(observations.size(), options.partitions,
                                                 options.knots);

  // Keep the region count addressable and the hierarchy within memory reason.
  const double total = (std::pow(options.partitions, tree.levels_) - 1.0) / (options.partitions - 1);
  if (total > 1e9) {
    throw ConfigError("NUM_LEVELS_M = " + std::to_string(tree.levels_) + " gives " +
                      std::to_string(total) + " regions, which is too many");
  }

  const BoundingBox data_box = extent ? *extent : bounding_box(observations);
  tree.regions_.resize(static_cast<std::size_t>(total));
  tree.regions_[0].level = 1;
  tree.regions_[0].box = extend_domain(data_box);
  for (int level = 1; level < tree.levels_; ++level) {
    const std::size_t begin = tree.level_begin(level);
    const std::size_t size = tree.level_size(level);
    for (std::size_t i = 0; i < size; ++i) {
      const std::size_t id = begin + i;
      const auto kids = split_region(tree.regions_[id].box, tree.partitions_);
      const std::size_t first = tree.first_child(id);
      for (std::size_t j = 0; j < kids.size(); ++j) {
        tree.regions_[first + j].level = level + 1;
        tree.regions_[first + j].box = kids[j];
      }
    }
  }

  std::unordered_set<Point, PointHash> prefinest;
  const std::size_t finest_begin = tree.level_begin(tree.levels_);
  for (std::size_t id = 0; id < finest_begin; ++id) {
    tree.regions_[id].knots = place_knots(tree.regions_[id].box, options.knots, options.offset);
    prefinest.insert(tree.regions_[id].knots.begin(), tree.regions_[id].knots.end());
  }

  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Point p = observations[i];
    if (prefinest.contains(p)) {
      tree.eliminated_.push_back(i);
      continue;
    }
    const auto region = tree.locate(p);
    if (!region) {
      std::ostringstream msg;
      msg << std::setprecision(17) << "observation " << i << " at (" << p.x << ", " << p.y
          << ") lies outside the level-1 domain";
      throw StructuralError(msg.str());
    }
    Region& leaf = tree.regions_[*region];
    leaf.observations.push_back(i);
    leaf.knots.push_back(p);
  }
  if (tree.retained_count() == 0) {
    throw StructuralError("all observations were eliminated (each coincides with a knot)");
  }
  return tree;
}

std::size_t count_knot_collisions(const PartitionTree& tree) {
  PointList knots;
  const std::size_t finest_begin = tree.level_begin(tree.levels());
  for (std::size_t id = 0; id < finest_begin; ++id) {
    const auto& k = tree.region(id).knots;
    knots.insert(knots.end(), k.begin(), k.end());
  }
  std::sort(knots.begin(), knots.end(), [](Point a, Point b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  // Coordinates that agree up to rounding count as one location.
  const BoundingBox& d = tree.domain();
  const double tol = 1e-9 * std::max(d.x_max - d.x_min, d.y_max - d.y_min);
  std::size_t collisions = 0;
  for (std::size_t i = 1; i < knots.size(); ++i)
    for (std::size_t j = i; j-- > 0 && knots[i].x - knots[j].x <= tol;)
      if (std::abs(knots[i].y - knots[j].y) <= tol) {
        ++collisions;
        break;
      }
  return collisions;
}

namespace {

void report_region(const PartitionTree& tree, std::size_t id, std::ostream& out) {
  const Region& region = tree.region(id);
  out << region.level << ' ' << tree.region_id(id).to_string() << ' ' << region.box.x_min << ' '
      << region.box.x_max << ' ' << region.box.y_min << ' ' << region.box.y_max << ' '
      << region.knots.size();
  if (tree.is_finest(id)) out << ' ' << region.observations.size();
  out << '\n';
  if (!tree.is_finest(id))
    for (std::size_t child : tree.children(id)) report_region(tree, child, out);
}

}  // namespace

void write_structure_report(const PartitionTree& tree, std::ostream& out) {
  const auto old_precision = out.precision(17);
  const auto counts = tree.finest_counts();
  const std::size_t max_count = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  const std::size_t min_count = counts.empty() ? 0 : *std::min_element(counts.begin(), counts.end());
  const std::size_t empty = static_cast<std::size_t>(std::count(counts.begin(), counts.end(), 0u));

  out << "# multi-resolution structure\n";
  out << "NUM_PARTITIONS_J " << tree.partitions() << '\n';
  out << "NUM_LEVELS_M " << tree.levels() << '\n';
  out << "NUM_KNOTS_r " << tree.requested_knots() << '\n';
  out << "r_hat " << tree.knots_per_region() << '\n';
  out << "OFFSET " << tree.offset() << '\n';
  out << "domain " << tree.domain().x_min << ' ' << tree.domain().x_max << ' '
      << tree.domain().y_min << ' ' << tree.domain().y_max << '\n';
  out << "total_regions " << tree.region_count() << '\n';
  for (int level = 1; level <= tree.levels(); ++level)
    out << "regions_at_level " << level << ' ' << tree.level_size(level) << '\n';
  out << "observations_input " << tree.input_count() << '\n';
  out << "observations_retained " << tree.retained_count() << '\n';
  out << "observations_eliminated " << tree.eliminated().size() << '\n';
  out << "finest_observations_min " << min_count << '\n';
  out << "finest_observations_mean "
      << static_cast<double>(tree.retained_count()) / static_cast<double>(counts.size()) << '\n';
  out << "finest_observations_max " << max_count << '\n';
  out << "finest_regions_empty " << empty << '\n';

  // Histogram of finest-level observation counts: count -> number of regions.
  std::map<std::size_t, std::size_t> histogram;
  for (std::size_t c : counts) ++histogram[c];
  out << "# histogram: observations_per_finest_region number_of_regions\n";
  for (const auto& [count, regions] : histogram) out << "histogram " << count << ' ' << regions << '\n';

  out << "# regions: level path x_min x_max y_min y_max knots [observations]\n";
  report_region(tree, 0, out);
  out.precision(old_precision);
}

void write_structure_report(const PartitionTree& tree, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open structure report '" + path + "' for writing");
  write_structure_report(tree, out);
  if (!out) throw IoError("failed writing structure report '" + path + "'");
}

}  // namespace mra
