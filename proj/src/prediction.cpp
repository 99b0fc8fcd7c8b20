#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mra/core.hpp"
#include "mra/errors.hpp"

namespace mra {

namespace {

/// Joint posterior covariance of the ancestors' eta, assembled from their rows.
Matrix ancestor_covariance(std::span<const ChainRow* const> rows, std::vector<Eigen::Index>& offsets) {
  offsets.assign(rows.size() + 1, 0);
  for (std::size_t l = 0; l < rows.size(); ++l) offsets[l + 1] = offsets[l] + rows[l]->mean.size();
  Matrix cov(offsets.back(), offsets.back());
  for (std::size_t l = 0; l < rows.size(); ++l) {
    const Eigen::Index wl = rows[l]->mean.size();
    for (std::size_t k = 0; k <= l; ++k) {
      const Eigen::Index wk = rows[k]->mean.size();
      cov.block(offsets[l], offsets[k], wl, wk) = rows[l]->cov[k];
      if (k != l) cov.block(offsets[k], offsets[l], wk, wl) = rows[l]->cov[k].transpose();
    }
  }
  return cov;
}

Vector ancestor_mean(std::span<const ChainRow* const> rows, const std::vector<Eigen::Index>& offsets) {
  Vector mean(offsets.back());
  for (std::size_t l = 0; l < rows.size(); ++l)
    mean.segment(offsets[l], rows[l]->mean.size()) = rows[l]->mean;
  return mean;
}

}  // namespace

ChainRow chain_row(const RegionPosterior& posterior, std::span<const ChainRow* const> ancestors) {
  const Eigen::Index r = posterior.precision_chol.rows();
  const Matrix precision_inv = posterior.precision_chol.solve(Matrix::Identity(r, r));
  ChainRow row;
  row.mean = posterior.precision_chol.solve(posterior.omega);
  if (ancestors.empty()) {
    row.cov.push_back(precision_inv);
    return row;
  }

  std::vector<Eigen::Index> offsets;
  const Matrix gamma = ancestor_covariance(ancestors, offsets);
  const Vector nu = ancestor_mean(ancestors, offsets);
  // eta_self | ancestors, y ~ N(P^-1 omega - L eta_anc, P^-1) with L = P^-1 A^T.
  const Matrix gain = posterior.precision_chol.solve(posterior.cross.transpose());
  const Matrix cross_cov = -gain * gamma;
  row.mean.noalias() -= gain * nu;
  Matrix self = precision_inv;
  self.noalias() -= cross_cov * gain.transpose();
  for (std::size_t k = 0; k < ancestors.size(); ++k)
    row.cov.push_back(cross_cov.middleCols(offsets[k], ancestors[k]->mean.size()));
  row.cov.push_back(0.5 * (self + self.transpose()));
  return row;
}

ChainSummary summarize_chain(std::span<const ChainRow* const> rows) {
  ChainSummary out;
  if (rows.empty()) return out;
  std::vector<Eigen::Index> offsets;
  out.cov = ancestor_covariance(rows, offsets);
  out.mean = ancestor_mean(rows, offsets);
  return out;
}

PointPrediction predict_point(const PartitionTree& tree, const PriorQuantities& prior,
                              const ChainSummary& chain, std::size_t finest,
                              const Vector& y_finest, const CovarianceParams& params, Point p) {
  const int levels = tree.levels();
  const auto ancestors = tree.ancestors(finest);
  const PointList query{p};

  // b_l = C_l(Q_{a_l}, p) stacked over l < M; s_l = K_{a_l}^{-1} b_l.
  std::vector<Eigen::Index> offsets(ancestors.size() + 1, 0);
  for (std::size_t l = 0; l < ancestors.size(); ++l)
    offsets[l + 1] = offsets[l] + static_cast<Eigen::Index>(tree.region(ancestors[l]).knots.size());
  Vector basis(offsets.back());
  Vector scaled(offsets.back());
  double remainder_var = covariance(p, p, params);
  for (std::size_t l = 0; l < ancestors.size(); ++l) {
    const std::size_t a = ancestors[l];
    Vector b = cross_covariance_matrix(tree.region(a).knots, query, params).col(0);
    if (l > 0) b.noalias() -= prior[a].Z.transpose() * basis.head(offsets[l]);
    const Vector s = prior[a].chol.solve(b);
    remainder_var -= b.dot(s);
    basis.segment(offsets[l], b.size()) = b;
    scaled.segment(offsets[l], b.size()) = s;
  }

  const RegionPrior& leaf = prior[finest];
  Vector g = basis;
  double mean = 0.0;
  double variance = remainder_var;
  if (leaf.knots() > 0) {
    Vector c = cross_covariance_matrix(tree.region(finest).knots, query, params).col(0);
    if (levels > 1) c.noalias() -= leaf.ancestor_blocks() * scaled;
    const Vector w = leaf.chol.solve(c);
    mean += w.dot(y_finest);
    variance -= c.dot(w);
    if (levels > 1) g.noalias() -= leaf.ancestor_blocks().transpose() * w;
  }
  if (g.size() > 0) {
    mean += g.dot(chain.mean);
    variance += g.dot(chain.cov * g);
  }
  return {mean, std::max(variance, 0.0)};
}

PredictionResults predict(const PartitionTree& tree, const CovarianceParams& params,
                          std::span<const double> y, const PointList& locations) {
  const PriorQuantities prior = compute_prior(tree, params);
  PosteriorOptions options;
  options.keep_for_prediction = true;
  const PosteriorQuantities post = posterior_pass(tree, prior, y, options);

  const std::size_t finest_begin = tree.level_begin(tree.levels());
  std::vector<ChainRow> rows(finest_begin);
  for (std::size_t id = 0; id < finest_begin; ++id) {
    std::vector<const ChainRow*> chain;
    for (std::size_t a : tree.ancestors(id)) chain.push_back(&rows[a]);
    rows[id] = chain_row(*post.regions[id], chain);
  }

  PredictionResults out;
  out.locations = locations;
  out.mean.assign(locations.size(), std::numeric_limits<double>::quiet_NaN());
  out.variance.assign(locations.size(), std::numeric_limits<double>::quiet_NaN());
  std::map<std::size_t, std::vector<std::size_t>> by_region;
  for (std::size_t i = 0; i < locations.size(); ++i)
    if (const auto finest = tree.locate(locations[i])) by_region[*finest].push_back(i);
  for (const auto& [finest, queries] : by_region) {
    const Vector values = region_values(tree, finest, y);
    std::vector<const ChainRow*> chain;
    for (std::size_t a : tree.ancestors(finest)) chain.push_back(&rows[a]);
    const ChainSummary summary = summarize_chain(chain);
    for (std::size_t i : queries) {
      const PointPrediction pp = predict_point(tree, prior, summary, finest, values, params, locations[i]);
      out.mean[i] = pp.mean;
      out.variance[i] = pp.variance;
    }
  }
  return out;
}

}  // namespace mra
