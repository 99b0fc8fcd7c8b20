#pragma once

#include <cstddef>
#include <vector>

#include "mra/partition.hpp"

namespace mra {

/// Half-open range [begin, end) of finest-region indices in canonical order.
struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// The first q mod p workers get floor(q/p) + 1 regions, the rest floor(q/p).
std::vector<Range> assign_static(std::size_t q, int workers);

/// Contiguous split balancing squared observation counts, cut greedily left to
/// right against (remaining load) / (remaining workers). Falls back to a
/// closest-to-target cut, or to the static split, when the plain greedy split
/// has a larger maximum load than the static one.
std::vector<Range> assign_dynamic(const std::vector<std::size_t>& counts, int workers);

/// Largest per-range sum of squared counts.
double max_load(const std::vector<Range>& ranges, const std::vector<std::size_t>& counts);

/// Each worker's finest regions plus all their ancestors, as sorted region ids.
std::vector<std::vector<std::size_t>> working_set(const std::vector<Range>& ranges,
                                                  const PartitionTree& tree);

/// How region results move at the end of the region's ascending step.
struct MergeInfo {
  bool local = true;
  /// Worker that finishes the region and keeps it afterwards.
  int holder = 0;
  /// Other workers holding children; each sends its partial sum to `holder`.
  std::vector<int> contributors;
};

/// One entry per region. Finest regions are local to their owner.
std::vector<MergeInfo> plan_merges(const std::vector<Range>& ranges, const PartitionTree& tree);

struct WorkerAssignment {
  int workers = 1;
  std::vector<Range> ranges;
  std::vector<std::vector<std::size_t>> working;
  std::vector<MergeInfo> merges;

  static WorkerAssignment make(const PartitionTree& tree, int workers, bool dynamic);

  /// Owner of finest index f.
  int owner(std::size_t finest_index) const;
  /// Unfinished regions (levels below `level`) still on worker w's list once
  /// every region of `level` is finished; level = M + 1 gives the initial set.
  std::vector<std::size_t> working_after(const PartitionTree& tree, int worker, int level) const;
};

}  // namespace mra
