#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mra/assignment.hpp"
#include "mra/core.hpp"
#include "mra/transport.hpp"

namespace mra {

struct ExecutorOptions {
  int workers = 1;
  int lanes = 1;
  /// Governs both the worker split and the lane loops.
  bool dynamic = false;
  TransportKind transport = TransportKind::in_process;
  std::optional<std::string> spill_directory;
  /// When set, each worker writes its predictions to prediction_file_name(stem, w).
  std::optional<std::string> prediction_stem;
};

/// Wall seconds per phase.
struct PhaseTimes {
  double prior = 0.0;
  double posterior = 0.0;
  double predict = 0.0;
};

struct WorkerStats {
  Range range;
  std::size_t peak_bytes = 0;
  /// Regions this worker finished, in processing order.
  std::vector<std::size_t> processed;
  /// Regions where this worker received contributions from other workers.
  std::vector<std::size_t> merged;
  PhaseTimes times;
};

struct ExecutionResult {
  double loglik = 0.0;
  double log_det = 0.0;
  double quad = 0.0;
  std::size_t observations = 0;
  /// Worker 0's view; the posterior time spans barrier to final reduction.
  PhaseTimes times;
  std::size_t peak_bytes = 0;
  std::vector<WorkerStats> workers;
  /// Per worker: its predictions and the query indices they belong to.
  std::vector<PredictionResults> predictions;
  std::vector<std::vector<std::size_t>> prediction_indices;
  /// All predictions in query order.
  PredictionResults combined;
};

/// Likelihood (locations == nullptr) or likelihood plus prediction across
/// `options.workers` workers. Queries outside the domain belong to worker 0
/// and yield NaN.
ExecutionResult run_parallel(const PartitionTree& tree, const CovarianceParams& params,
                             std::span<const double> y, const PointList* locations,
                             const ExecutorOptions& options);

}  // namespace mra
