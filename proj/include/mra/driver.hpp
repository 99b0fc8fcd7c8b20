#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "mra/config.hpp"
#include "mra/errors.hpp"
#include "mra/executor.hpp"
#include "mra/optimizer.hpp"
#include "mra/partition.hpp"

namespace mra {

struct RunOptions {
  int workers = 1;
  int lanes = 1;
  TransportKind transport = TransportKind::in_process;
  bool verbose = false;
  std::optional<std::string> timing_csv;
  /// Where structure_information.txt goes.
  std::string output_dir = ".";
};

struct RunReport {
  CalculationMode mode = CalculationMode::likelihood;
  int workers = 1;
  int lanes = 1;
  double load_seconds = 0.0;
  double dedup_seconds = 0.0;
  double build_seconds = 0.0;
  double prior_seconds = 0.0;
  double posterior_seconds = 0.0;
  double predict_seconds = 0.0;
  double optimize_seconds = 0.0;
  double total_seconds = 0.0;
  std::size_t input_rows = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t eliminated = 0;
  std::optional<double> loglik;
  std::optional<double> loglik_without_constant;
  std::size_t predictions = 0;
  std::optional<OptimizationResult> optimum;
};

/// Process exit code for an error kind: config 2, format 3, numerical 4,
/// io 5, structural 6, transport 7.
int exit_code(ErrorKind kind);

/// Loads data, builds the tree and dispatches the configured mode. Errors are
/// reported on `err` and mapped to exit codes; 1 means an unexpected failure.
int run(const std::string& config_path, const RunOptions& options, std::ostream& out,
        std::ostream& err, RunReport* report = nullptr);

/// Data and tree summary printed when PRINT_DETAIL_FLAG is true.
void print_detail(const PartitionTree& tree, const ObservationSet& data, std::size_t input_rows,
                  std::size_t duplicates_dropped, bool flag, std::ostream& out);

void write_timing_csv(const RunReport& report, const std::string& path);

}  // namespace mra
