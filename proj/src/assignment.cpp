#include "mra/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "mra/errors.hpp"

namespace mra {

namespace {

void check_workers(int workers) {
  if (workers < 1) throw ConfigError("worker count must be at least 1, got " + std::to_string(workers));
}

double squared(std::size_t c) { return static_cast<double>(c) * static_cast<double>(c); }

}  // namespace

std::vector<Range> assign_static(std::size_t q, int workers) {
  check_workers(workers);
  const auto p = static_cast<std::size_t>(workers);
  if (q < p) {
    std::cerr << "warning: " << p << " workers for " << q
              << " finest regions; some workers get no regions\n";
  }
  std::vector<Range> ranges;
  std::size_t begin = 0;
  for (std::size_t w = 0; w < p; ++w) {
    const std::size_t size = q / p + (w < q % p ? 1 : 0);
    ranges.push_back({begin, begin + size});
    begin += size;
  }
  return ranges;
}

namespace {

/// Greedy left-to-right split. Without lookahead the region that reaches the
/// target stays left; with it, that region stays left only if this lands at
/// least as close to the target.
std::vector<Range> greedy_split(const std::vector<std::size_t>& counts, std::size_t p, bool lookahead) {
  double remaining = 0.0;
  for (std::size_t c : counts) remaining += squared(c);
  std::vector<Range> ranges;
  std::size_t i = 0;
  for (std::size_t w = 0; w < p; ++w) {
    const std::size_t begin = i;
    if (w + 1 == p) {
      i = counts.size();
    } else {
      const double target = remaining / static_cast<double>(p - w);
      double sum = 0.0;
      while (i < counts.size()) {
        const double next = sum + squared(counts[i]);
        if (next < target) {
          sum = next;
          ++i;
          continue;
        }
        if (!lookahead || next - target <= target - sum) {
          sum = next;
          ++i;
        }
        break;
      }
      remaining -= sum;
    }
    ranges.push_back({begin, i});
  }
  return ranges;
}

}  // namespace

std::vector<Range> assign_dynamic(const std::vector<std::size_t>& counts, int workers) {
  check_workers(workers);
  const auto p = static_cast<std::size_t>(workers);
  std::vector<Range> best = greedy_split(counts, p, false);
  // A large region reaching the target late can leave one worker with
  // nearly everything; fall back to the better of the alternatives then.
  const std::vector<Range> fixed = assign_static(counts.size(), workers);
  if (max_load(best, counts) > max_load(fixed, counts)) {
    std::vector<Range> closer = greedy_split(counts, p, true);
    best = max_load(closer, counts) <= max_load(fixed, counts) ? std::move(closer) : fixed;
  }
  return best;
}

double max_load(const std::vector<Range>& ranges, const std::vector<std::size_t>& counts) {
  double best = 0.0;
  for (const Range& r : ranges) {
    double load = 0.0;
    for (std::size_t i = r.begin; i < r.end; ++i) load += squared(counts[i]);
    best = std::max(best, load);
  }
  return best;
}

std::vector<std::vector<std::size_t>> working_set(const std::vector<Range>& ranges,
                                                  const PartitionTree& tree) {
  std::vector<std::vector<std::size_t>> out;
  for (const Range& r : ranges) {
    std::set<std::size_t> set;
    for (std::size_t f = r.begin; f < r.end; ++f) {
      const std::size_t id = tree.finest_region(f);
      set.insert(id);
      for (std::size_t a : tree.ancestors(id)) set.insert(a);
    }
    out.emplace_back(set.begin(), set.end());
  }
  return out;
}

std::vector<MergeInfo> plan_merges(const std::vector<Range>& ranges, const PartitionTree& tree) {
  std::vector<MergeInfo> plan(tree.region_count());
  for (std::size_t w = 0; w < ranges.size(); ++w)
    for (std::size_t f = ranges[w].begin; f < ranges[w].end; ++f)
      plan[tree.finest_region(f)].holder = static_cast<int>(w);

  for (int level = tree.levels() - 1; level >= 1; --level) {
    const std::size_t begin = tree.level_begin(level);
    for (std::size_t id = begin; id < begin + tree.level_size(level); ++id) {
      std::set<int> holders;
      for (std::size_t c : tree.children(id)) holders.insert(plan[c].holder);
      MergeInfo& info = plan[id];
      info.holder = *holders.begin();
      info.contributors.assign(std::next(holders.begin()), holders.end());
      info.local = info.contributors.empty();
    }
  }
  return plan;
}

WorkerAssignment WorkerAssignment::make(const PartitionTree& tree, int workers, bool dynamic) {
  WorkerAssignment a;
  a.workers = workers;
  a.ranges = dynamic ? assign_dynamic(tree.finest_counts(), workers)
                     : assign_static(tree.finest_count(), workers);
  a.working = working_set(a.ranges, tree);
  a.merges = plan_merges(a.ranges, tree);
  return a;
}

int WorkerAssignment::owner(std::size_t finest_index) const {
  for (std::size_t w = 0; w < ranges.size(); ++w)
    if (ranges[w].contains(finest_index)) return static_cast<int>(w);
  throw StructuralError("finest index " + std::to_string(finest_index) + " has no owner");
}

std::vector<std::size_t> WorkerAssignment::working_after(const PartitionTree& tree, int worker,
                                                         int level) const {
  const auto& set = working[static_cast<std::size_t>(worker)];
  if (level > tree.levels()) return set;
  std::vector<std::size_t> out;
  for (std::size_t id : set) {
    const int m = tree.level_of(id);
    if (m >= level) continue;
    // Unfinished ancestors stay while a region held here at `level` lies below them.
    for (std::size_t c : set)
      if (tree.level_of(c) == level && merges[c].holder == worker && tree.ancestor_at(c, m) == id) {
        out.push_back(id);
        break;
      }
  }
  return out;
}

}  // namespace mra
