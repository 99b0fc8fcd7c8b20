#include "mra/lanes.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "mra/errors.hpp"

namespace mra {

LanePool::LanePool(int lanes, bool dynamic) : lanes_(lanes), dynamic_(dynamic) {
  if (lanes < 1) throw ConfigError("lane count must be at least 1, got " + std::to_string(lanes));
}

void LanePool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) const {
  const std::size_t lanes = std::min<std::size_t>(static_cast<std::size_t>(lanes_), n);
  if (lanes <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto guarded = [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      failed = true;
    }
  };
  const auto lane = [&](std::size_t id) {
    if (dynamic_) {
      for (std::size_t i = next++; i < n && !failed; i = next++) guarded(i);
    } else {
      const std::size_t begin = id * n / lanes;
      const std::size_t end = (id + 1) * n / lanes;
      for (std::size_t i = begin; i < end && !failed; ++i) guarded(i);
    }
  };
  {
    std::vector<std::jthread> threads;
    for (std::size_t id = 1; id < lanes; ++id) threads.emplace_back(lane, id);
    lane(0);
  }
  if (error) std::rethrow_exception(error);
}

int available_lanes() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace mra
