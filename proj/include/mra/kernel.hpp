#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "mra/geometry.hpp"

namespace mra {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Sill alpha, range beta, nugget tau of the exponential covariance.
struct CovarianceParams {
  double alpha = 1.0;
  double beta = 1.0;
  double tau = 0.0;

  bool valid() const { return alpha > 0.0 && beta > 0.0 && tau >= 0.0; }
  friend bool operator==(const CovarianceParams&, const CovarianceParams&) = default;
};

/// alpha * exp(-d / beta) with planar Euclidean d. The nugget is not included.
inline double covariance(Point p, Point q, const CovarianceParams& params) {
  const double d = std::hypot(p.x - q.x, p.y - q.y);
  return params.alpha * std::exp(-d / params.beta);
}

/// Entry (i, j) = covariance(a[i], b[j]).
Matrix cross_covariance_matrix(const PointList& a, const PointList& b,
                               const CovarianceParams& params);

/// K + tau * I. Rejects non-square input.
Matrix add_nugget(Matrix k, double tau);

}  // namespace mra
