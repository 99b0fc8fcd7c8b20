#pragma once

#include <cstddef>

#include "mra/core.hpp"

namespace mra::oracle {

/// Hard cap on the dense reference; it is O(n^3) and rebuilt on every call.
inline constexpr std::size_t kMaxObservations = 1000;

/// MRA covariance between two point lists, built by literal application of
/// the level recursion: levels below M contribute
/// C_m(a, Q) C_m(Q, Q)^{-1} C_m(Q, b) within a shared level-m region and
/// level M contributes C_M(a, b) within a shared finest region.
Matrix mra_covariance(const PartitionTree& tree, const CovarianceParams& params,
                      const PointList& a, const PointList& b);

/// C_m(X, Y) for point lists inside one level-(m-1) region, `region` being
/// any region at level >= m-1 containing them.
Matrix conditional_covariance(const PartitionTree& tree, const CovarianceParams& params, int m,
                              const PointList& x, const PointList& y, std::size_t region);

class DenseMraCovariance {
 public:
  DenseMraCovariance(const PartitionTree& tree, const CovarianceParams& params,
                     PointList observations);

  const Matrix& sigma() const { return sigma_; }
  const PointList& observations() const { return observations_; }
  /// MRA covariances between p and every observation.
  Vector cross(Point p) const;
  double prior_var(Point p) const;

 private:
  const PartitionTree* tree_;
  CovarianceParams params_;
  PointList observations_;
  Matrix sigma_;
};

/// Retained observation locations and values of `tree`, in finest-region order.
struct RetainedData {
  PointList locations;
  Vector values;
};
RetainedData retained(const PartitionTree& tree, const PointList& all_locations,
                      std::span<const double> y);

DenseMraCovariance mra_covariance_dense(const PartitionTree& tree, const CovarianceParams& params,
                                        const PointList& locations);

double exact_loglik_dense(const Matrix& sigma, double tau, const Vector& y);

PredictionResults exact_predict_dense(const DenseMraCovariance& cov, double tau, const Vector& y,
                                      const PointList& queries);

}  // namespace mra::oracle
