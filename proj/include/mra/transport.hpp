#pragma once

#include <cstdint>
#include <functional>
#include <string>

namespace mra {

/// Message phases; a tag combines a phase with a region id.
enum class Phase : std::uint64_t { merge = 1, chain = 2, reduce = 3, barrier = 4, result = 5 };

inline std::uint64_t make_tag(Phase phase, std::uint64_t region = 0) {
  return (static_cast<std::uint64_t>(phase) << 56) | region;
}

/// One worker's endpoint: reliable, ordered point-to-point messages.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual int rank() const = 0;
  virtual int size() const = 0;
  virtual void send(int to, std::uint64_t tag, std::string payload) = 0;
  /// Blocks until a message with `tag` from `from` arrives. Throws the
  /// originating error when another worker has failed.
  virtual std::string recv(int from, std::uint64_t tag) = 0;

  /// Every worker waits until all have arrived.
  void barrier(std::uint64_t round = 0);
};

enum class TransportKind { in_process, process };

TransportKind parse_transport_kind(const std::string& text);

using WorkerBody = std::function<void(Transport&)>;

/// Runs `body` once per worker and returns when all have finished. With the
/// process transport, workers 1..p-1 run in forked child processes and only
/// worker 0's side effects are visible to the caller. The first failure is
/// rethrown with its original error kind.
void run_workers(TransportKind kind, int workers, const WorkerBody& body);

}  // namespace mra
