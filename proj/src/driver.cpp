#include "mra/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>

#include "mra/errors.hpp"

namespace mra {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Relative paths in a config file are taken relative to the file itself.
std::string resolve(const fs::path& base, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (base / path).string();
}

PointList finite_points(const ObservationSet& data) {
  PointList out;
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(data.location(i));
  return out;
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::format: return 3;
    case ErrorKind::numerical: return 4;
    case ErrorKind::io: return 5;
    case ErrorKind::structural: return 6;
    case ErrorKind::transport: return 7;
  }
  return 1;
}

void print_detail(const PartitionTree& tree, const ObservationSet& data, std::size_t input_rows,
                  std::size_t duplicates_dropped, bool flag, std::ostream& out) {
  if (!flag) return;
  const BoundingBox box = bounding_box(finite_points(data));
  out << std::setprecision(10);
  out << "data extent: lon [" << box.x_min << ", " << box.x_max << "], lat [" << box.y_min << ", "
      << box.y_max << "]\n";
  out << "observations: " << input_rows << " read, " << duplicates_dropped << " duplicates dropped, "
      << tree.input_count() << " observed, " << tree.eliminated().size()
      << " eliminated at knot locations, " << tree.retained_count() << " used\n";
  out << "J = " << tree.partitions() << ", M = " << tree.levels() << ", r = " << tree.requested_knots()
      << ", r_hat = " << tree.knots_per_region() << "\n";
  for (int level = 1; level <= tree.levels(); ++level)
    out << "level " << level << ": " << tree.level_size(level) << " regions\n";
  const auto counts = tree.finest_counts();
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  double mean = 0.0;
  for (std::size_t c : counts) mean += static_cast<double>(c);
  mean /= static_cast<double>(counts.size());
  out << "finest-level observations per region: min " << *lo << ", mean " << std::setprecision(6)
      << mean << ", max " << *hi << "\n";
}

void write_timing_csv(const RunReport& report, const std::string& path) {
  std::ofstream csv(path);
  if (!csv) throw IoError("cannot open timing file '" + path + "' for writing");
  csv << "phase,seconds\n" << std::setprecision(9);
  csv << "load," << report.load_seconds << "\n";
  csv << "dedup," << report.dedup_seconds << "\n";
  csv << "build," << report.build_seconds << "\n";
  csv << "prior," << report.prior_seconds << "\n";
  csv << "posterior," << report.posterior_seconds << "\n";
  csv << "predict," << report.predict_seconds << "\n";
  csv << "optimize," << report.optimize_seconds << "\n";
  csv << "total," << report.total_seconds << "\n";
  if (!csv) throw IoError("failed writing timing file '" + path + "'");
}

namespace {

void execute(const std::string& config_path, const RunOptions& options, std::ostream& out,
             RunReport& report) {
  const auto total_start = Clock::now();
  const Config cfg = parse_config(config_path);
  const fs::path base = fs::path(config_path).parent_path();
  report.mode = cfg.mode;
  report.workers = options.workers;
  report.lanes = options.lanes;

  auto start = Clock::now();
  ObservationSet data = read_observations(resolve(base, cfg.data_file), false);
  report.load_seconds = since(start);
  report.input_rows = data.size();
  if (cfg.eliminate_duplicates) {
    start = Clock::now();
    report.duplicates_dropped = deduplicate(data);
    report.dedup_seconds = since(start);
  }

  start = Clock::now();
  const ObservationSet observed = observed_rows(data);
  if (observed.size() == 0) throw FormatError("'" + cfg.data_file + "' has no non-NaN observations");
  TreeOptions tree_options;
  tree_options.partitions = cfg.partitions;
  tree_options.knots = cfg.knots;
  tree_options.levels = cfg.levels;
  tree_options.offset = cfg.offset;
  // The domain covers NaN rows too, so they can be predicted.
  const PartitionTree tree =
      PartitionTree::build(observed.locations(), tree_options, bounding_box(data.locations()));
  report.build_seconds = since(start);
  report.eliminated = tree.eliminated().size();
  print_detail(tree, data, report.input_rows, report.duplicates_dropped, cfg.print_detail, out);
  if (options.verbose) {
    out << "mode " << to_string(cfg.mode) << ", " << options.workers << " worker(s), " << options.lanes
        << " lane(s), " << (cfg.dynamic_schedule ? "dynamic" : "static") << " scheduling\n";
  }

  ExecutorOptions exec;
  exec.workers = options.workers;
  exec.lanes = options.lanes;
  exec.dynamic = cfg.dynamic_schedule;
  exec.transport = options.transport;
  if (cfg.save_to_disk) {
    exec.spill_directory = resolve(base, cfg.tmp_directory);
    std::error_code ec;
    fs::create_directories(*exec.spill_directory, ec);
    if (ec) throw IoError("TMP_DIRECTORY: cannot create '" + *exec.spill_directory + "': " + ec.message());
  }
  const std::vector<double>& y = observed.value;

  out << std::setprecision(17);
  switch (cfg.mode) {
    case CalculationMode::build_structure_only: {
      std::error_code ec;
      fs::create_directories(options.output_dir, ec);
      const std::string path = (fs::path(options.output_dir) / "structure_information.txt").string();
      write_structure_report(tree, path);
      out << "structure written to " << path << " (" << tree.region_count() << " regions)\n";
      break;
    }
    case CalculationMode::likelihood: {
      const ExecutionResult r = run_parallel(tree, cfg.params, y, nullptr, exec);
      report.prior_seconds = r.times.prior;
      report.posterior_seconds = r.times.posterior;
      report.loglik = r.loglik;
      report.loglik_without_constant = -0.5 * (r.log_det + r.quad);
      out << "loglik = " << r.loglik << "\n";
      out << "loglik_without_constant = " << *report.loglik_without_constant << "\n";
      break;
    }
    case CalculationMode::prediction: {
      const PointList locations =
          resolve_prediction_locations(cfg.location_mode, data, resolve(base, cfg.location_file));
      if (locations.empty()) std::cerr << "warning: no prediction locations for this mode\n";
      if (cfg.dump_predictions) exec.prediction_stem = resolve(base, cfg.results_file);
      const ExecutionResult r = run_parallel(tree, cfg.params, y, &locations, exec);
      report.prior_seconds = r.times.prior;
      report.posterior_seconds = r.times.posterior;
      report.predict_seconds = r.times.predict;
      report.loglik = r.loglik;
      report.predictions = locations.size();
      std::size_t outside = 0;
      for (double m : r.combined.mean) outside += std::isnan(m) ? 1 : 0;
      out << "predictions = " << locations.size() << "\n";
      if (outside > 0) out << "outside_domain = " << outside << "\n";
      if (cfg.dump_predictions)
        out << "results written to " << *exec.prediction_stem << "_0 .. _" << options.workers - 1 << "\n";
      break;
    }
    case CalculationMode::optimization: {
      OptimizationProblem problem;
      problem.lower = cfg.lower_bound;
      problem.upper = cfg.upper_bound;
      problem.initial = cfg.initial_guess;
      problem.max_iterations = cfg.max_iterations;
      problem.objective = [&](const CovarianceParams& p) {
        const ExecutionResult r = run_parallel(tree, p, y, nullptr, exec);
        report.prior_seconds += r.times.prior;
        report.posterior_seconds += r.times.posterior;
        return r.loglik;
      };
      problem.on_evaluation = [&](int k, const CovarianceParams& p, double value) {
        out << "iteration " << k << " alpha " << p.alpha << " beta " << p.beta << " tau " << p.tau
            << " loglik " << value << "\n";
      };
      start = Clock::now();
      report.optimum = maximize_likelihood(problem);
      report.optimize_seconds = since(start);
      report.loglik = report.optimum->loglik;
      const CovarianceParams& best = report.optimum->best;
      out << "optimum alpha = " << best.alpha << "\n";
      out << "optimum beta = " << best.beta << "\n";
      out << "optimum tau = " << best.tau << "\n";
      out << "optimum loglik = " << report.optimum->loglik << "\n";
      out << "evaluations = " << report.optimum->evaluations << "\n";
      break;
    }
  }
  report.total_seconds = since(total_start);

  if (options.verbose) {
    out << std::setprecision(6) << "time load " << report.load_seconds << " s, build "
        << report.build_seconds << " s, prior " << report.prior_seconds << " s, posterior "
        << report.posterior_seconds << " s, predict " << report.predict_seconds << " s, optimize "
        << report.optimize_seconds << " s, total " << report.total_seconds << " s\n";
  }
  if (options.timing_csv) write_timing_csv(report, *options.timing_csv);
}

}  // namespace

int run(const std::string& config_path, const RunOptions& options, std::ostream& out,
        std::ostream& err, RunReport* report) {
  RunReport local;
  RunReport& rep = report ? *report : local;
  try {
    execute(config_path, options, out, rep);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mra
