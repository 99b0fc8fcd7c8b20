#pragma once

#include <cstddef>
#include <functional>

namespace mra {

/// Data-parallel loop over independent tasks within one worker. Static
/// scheduling gives each lane an even contiguous chunk; dynamic scheduling
/// lets idle lanes pick up the next task one at a time.
class LanePool {
 public:
  LanePool(int lanes, bool dynamic);

  int lanes() const { return lanes_; }
  bool dynamic() const { return dynamic_; }

  /// Runs body(i) for i in [0, n). The first exception thrown by any task is
  /// rethrown after all lanes stop.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) const;

 private:
  int lanes_;
  bool dynamic_;
};

/// Hardware concurrency, at least 1.
int available_lanes();

}  // namespace mra
