#include "mra/kernel.hpp"

#include <string>

#include "mra/errors.hpp"

namespace mra {

Matrix cross_covariance_matrix(const PointList& a, const PointList& b,
                               const CovarianceParams& params) {
  Matrix out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const Point q = b[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      out(i, j) = covariance(a[static_cast<std::size_t>(i)], q, params);
  }
  return out;
}

Matrix add_nugget(Matrix k, double tau) {
  if (k.rows() != k.cols()) {
    throw StructuralError("add_nugget: matrix is " + std::to_string(k.rows()) + "x" +
                          std::to_string(k.cols()) + ", expected square");
  }
  k.diagonal().array() += tau;
  return k;
}

}  // namespace mra
