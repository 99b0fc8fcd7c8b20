#include "mra/oracle.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mra/errors.hpp"

namespace mra::oracle {

Matrix conditional_covariance(const PartitionTree& tree, const CovarianceParams& params, int m,
                              const PointList& x, const PointList& y, std::size_t region) {
  if (m == 1) return cross_covariance_matrix(x, y, params);
  const std::size_t parent = tree.ancestor_at(region, m - 1);
  const PointList& q = tree.region(parent).knots;
  const Matrix xy = conditional_covariance(tree, params, m - 1, x, y, parent);
  if (q.empty()) return xy;
  const Matrix xq = conditional_covariance(tree, params, m - 1, x, q, parent);
  const Matrix qq = conditional_covariance(tree, params, m - 1, q, q, parent);
  const Matrix qy = conditional_covariance(tree, params, m - 1, q, y, parent);
  return xy - xq * qq.ldlt().solve(qy);
}

namespace {

std::size_t region_of(const PartitionTree& tree, Point p, int level) {
  const auto id = tree.locate(p, level);
  if (!id) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "oracle: location (" << p.x << ", " << p.y << ") is outside the level-1 domain";
    throw StructuralError(msg.str());
  }
  return *id;
}

}  // namespace

Matrix mra_covariance(const PartitionTree& tree, const CovarianceParams& params, const PointList& a,
                      const PointList& b) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  const int levels = tree.levels();
  for (int m = 1; m <= levels; ++m) {
    std::vector<std::size_t> ra(a.size()), rb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) ra[i] = region_of(tree, a[i], m);
    for (std::size_t j = 0; j < b.size(); ++j) rb[j] = region_of(tree, b[j], m);
    const std::size_t begin = tree.level_begin(m);
    for (std::size_t id = begin; id < begin + tree.level_size(m); ++id) {
      std::vector<Eigen::Index> ia, ib;
      PointList pa, pb;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (ra[i] == id) {
          ia.push_back(static_cast<Eigen::Index>(i));
          pa.push_back(a[i]);
        }
      for (std::size_t j = 0; j < b.size(); ++j)
        if (rb[j] == id) {
          ib.push_back(static_cast<Eigen::Index>(j));
          pb.push_back(b[j]);
        }
      if (pa.empty() || pb.empty()) continue;

      Matrix term;
      if (m == levels) {
        term = conditional_covariance(tree, params, m, pa, pb, id);
      } else {
        const PointList& q = tree.region(id).knots;
        const Matrix aq = conditional_covariance(tree, params, m, pa, q, id);
        const Matrix qq = conditional_covariance(tree, params, m, q, q, id);
        const Matrix qb = conditional_covariance(tree, params, m, q, pb, id);
        term = aq * qq.ldlt().solve(qb);
      }
      for (std::size_t i = 0; i < ia.size(); ++i)
        for (std::size_t j = 0; j < ib.size(); ++j)
          out(ia[i], ib[j]) += term(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

DenseMraCovariance::DenseMraCovariance(const PartitionTree& tree, const CovarianceParams& params,
                                       PointList observations)
    : tree_(&tree), params_(params), observations_(std::move(observations)) {
  if (observations_.size() > kMaxObservations) {
    throw StructuralError("dense oracle is limited to " + std::to_string(kMaxObservations) +
                          " observations, got " + std::to_string(observations_.size()));
  }
  sigma_ = mra_covariance(tree, params, observations_, observations_);
}

Vector DenseMraCovariance::cross(Point p) const {
  return mra_covariance(*tree_, params_, PointList{p}, observations_).row(0).transpose();
}

double DenseMraCovariance::prior_var(Point p) const {
  return mra_covariance(*tree_, params_, PointList{p}, PointList{p})(0, 0);
}

RetainedData retained(const PartitionTree& tree, const PointList& all_locations,
                      std::span<const double> y) {
  RetainedData out;
  std::vector<double> values;
  for (std::size_t f = 0; f < tree.finest_count(); ++f)
    for (std::size_t i : tree.region(tree.finest_region(f)).observations) {
      out.locations.push_back(all_locations[i]);
      values.push_back(y[i]);
    }
  out.values = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  return out;
}

DenseMraCovariance mra_covariance_dense(const PartitionTree& tree, const CovarianceParams& params,
                                        const PointList& locations) {
  return DenseMraCovariance(tree, params, locations);
}

double exact_loglik_dense(const Matrix& sigma, double tau, const Vector& y) {
  const Eigen::Index n = sigma.rows();
  const Matrix total = sigma + tau * Matrix::Identity(n, n);
  const Eigen::LLT<Matrix> chol(total);
  if (chol.info() != Eigen::Success) throw NumericalError("oracle: covariance is not positive definite");
  const double log_det = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
  const double quad = y.dot(chol.solve(y));
  return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + log_det + quad);
}

PredictionResults exact_predict_dense(const DenseMraCovariance& cov, double tau, const Vector& y,
                                      const PointList& queries) {
  const Eigen::Index n = cov.sigma().rows();
  const Eigen::LLT<Matrix> chol(cov.sigma() + tau * Matrix::Identity(n, n));
  if (chol.info() != Eigen::Success) throw NumericalError("oracle: covariance is not positive definite");
  const Vector alpha = chol.solve(y);
  PredictionResults out;
  out.locations = queries;
  for (const Point& p : queries) {
    const Vector c = cov.cross(p);
    out.mean.push_back(c.dot(alpha));
    out.variance.push_back(cov.prior_var(p) - c.dot(chol.solve(c)));
  }
  return out;
}

}  // namespace mra::oracle
