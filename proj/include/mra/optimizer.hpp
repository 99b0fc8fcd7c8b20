#pragma once

#include <functional>
#include <vector>

#include "mra/kernel.hpp"

namespace mra {

/// Derivative-free box-constrained maximization with a quadratic
/// interpolation model and a box-shaped trust region.
struct BoxProblem {
  std::function<double(const std::vector<double>&)> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> initial;
  /// Objective evaluations allowed, including the initial one.
  int max_evaluations = 100;
  /// Per-coordinate log scaling; only honoured where lower > 0.
  std::vector<bool> log_scale;
  double initial_radius = 0.1;  // in the unit box
  double final_radius = 1e-6;
  std::function<void(int evaluation, const std::vector<double>& x, double value)> on_evaluation;
};

struct BoxResult {
  std::vector<double> best;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

BoxResult maximize_box(const BoxProblem& problem);

struct OptimizationProblem {
  std::function<double(const CovarianceParams&)> objective;
  CovarianceParams lower;
  CovarianceParams upper;
  CovarianceParams initial;
  int max_iterations = 100;
  std::function<void(int evaluation, const CovarianceParams& params, double loglik)> on_evaluation;
};

struct OptimizationResult {
  CovarianceParams best;
  double loglik = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Parameters with a positive lower bound are searched on a log scale.
OptimizationResult maximize_likelihood(const OptimizationProblem& problem);

}  // namespace mra
