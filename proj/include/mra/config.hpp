#pragma once

#include <optional>
#include <string>

#include "mra/data_io.hpp"
#include "mra/kernel.hpp"

namespace mra {

enum class CalculationMode { build_structure_only, likelihood, prediction, optimization };

CalculationMode parse_calculation_mode(const std::string& text);
std::string to_string(CalculationMode mode);

/// Settings read from a `KEY = VALUE` parameter file. Keys not needed by the
/// selected mode may be absent; flags default to false and OFFSET to e/100.
struct Config {
  std::string data_file;
  bool eliminate_duplicates = false;
  double offset = 0.0;
  int partitions = 2;
  int knots = 1;
  std::optional<int> levels;  // nullopt = "default"
  bool print_detail = false;
  CalculationMode mode = CalculationMode::likelihood;

  LocationMode location_mode = LocationMode::nan_values;
  std::string location_file;
  bool dump_predictions = false;
  std::string results_file;

  bool save_to_disk = false;
  std::string tmp_directory;
  bool dynamic_schedule = false;

  CovarianceParams params;
  int max_iterations = 0;
  CovarianceParams lower_bound;
  CovarianceParams upper_bound;
  CovarianceParams initial_guess;
};

Config parse_config(const std::string& path);
/// Parses configuration text; `origin` names the source in diagnostics.
Config parse_config_text(const std::string& text, const std::string& origin = "<config>");

}  // namespace mra
