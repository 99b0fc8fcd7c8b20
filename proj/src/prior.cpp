#include <cmath>
#include <sstream>

#include "mra/core.hpp"
#include "mra/errors.hpp"

namespace mra {

namespace {

std::string describe(const PartitionTree& tree, std::size_t region) {
  std::ostringstream out;
  out << "region (" << tree.region_id(region).to_string() << ") at level " << tree.level_of(region);
  return out.str();
}

}  // namespace

RegionPrior compute_region_prior(const PartitionTree& tree, std::size_t region,
                                 const CovarianceParams& params, const PriorQuantities& prior) {
  const Region& self = tree.region(region);
  const int level = self.level;
  const Eigen::Index n = static_cast<Eigen::Index>(self.knots.size());
  const Eigen::Index width = tree.knots_per_region();
  const Eigen::Index anc_cols = (level - 1) * width;
  const auto ancestors = tree.ancestors(region);

  RegionPrior out;
  out.level = level;
  out.computed = true;
  out.R.resize(n, anc_cols + n);
  if (n == 0) return out;

  for (int l = 1; l < level; ++l) {
    const std::size_t a = ancestors[static_cast<std::size_t>(l - 1)];
    auto block = out.R.middleCols((l - 1) * width, width);
    block = cross_covariance_matrix(self.knots, tree.region(a).knots, params);
    if (l > 1) block.noalias() -= out.R.leftCols((l - 1) * width) * prior[a].Z;
  }

  Matrix z(anc_cols, n);
  for (int k = 1; k < level; ++k) {
    const std::size_t a = ancestors[static_cast<std::size_t>(k - 1)];
    z.middleRows((k - 1) * width, width) =
        prior[a].chol.solve(out.R.middleCols((k - 1) * width, width).transpose());
  }

  Matrix k = cross_covariance_matrix(self.knots, self.knots, params);
  if (level > 1) k.noalias() -= out.R.leftCols(anc_cols) * z;
  k = 0.5 * (k + k.transpose()).eval();
  out.R.rightCols(n) = k;

  if (tree.is_finest(region)) {
    k.diagonal().array() += params.tau;
  } else {
    out.Z = std::move(z);
  }
  if (!factor_positive_definite(k, out.chol)) {
    throw NumericalError("covariance of the " + std::to_string(n) + " knots in " +
                         describe(tree, region) +
                         " is not positive definite; try a larger TAU or fewer knots");
  }
  out.log_det = 2.0 * out.chol.matrixLLT().diagonal().array().log().sum();
  return out;
}

bool factor_positive_definite(const Matrix& a, Eigen::LLT<Matrix>& chol) {
  chol.compute(a);
  if (chol.info() != Eigen::Success) return false;
  const auto diag = chol.matrixLLT().diagonal();
  if (!diag.allFinite() || diag.size() == 0) return diag.size() == 0;
  const double scale = a.diagonal().maxCoeff();
  return diag.minCoeff() > 0.0 && diag.array().square().minCoeff() > 1e-14 * scale;
}

PriorQuantities compute_prior(const PartitionTree& tree, const CovarianceParams& params) {
  PriorQuantities prior(tree.region_count());
  for (std::size_t id = 0; id < tree.region_count(); ++id)
    prior[id] = compute_region_prior(tree, id, params, prior);
  return prior;
}

double estimate_memory_gib(int partitions, int levels, int knots) {
  return std::pow(static_cast<double>(partitions), levels - 1) * levels * (levels - 1) *
         static_cast<double>(knots) * static_cast<double>(knots) * std::ldexp(1.0, -28);
}

}  // namespace mra
