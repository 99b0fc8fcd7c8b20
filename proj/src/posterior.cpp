#include <cmath>
#include <numbers>
#include <sstream>

#include "mra/core.hpp"
#include "mra/errors.hpp"
#include "mra/spill.hpp"

namespace mra {

std::size_t AtildeSet::index(int k, int l, int levels) {
  const auto km1 = static_cast<std::size_t>(k - 1);
  // Rows 1..k-1 hold levels, levels-1, ... blocks.
  return km1 * static_cast<std::size_t>(levels) - (km1 * (km1 + 1)) / 2 + km1 +
         static_cast<std::size_t>(l - k);
}

std::size_t AtildeSet::bytes() const {
  std::size_t total = 0;
  for (const Matrix& b : blocks) total += static_cast<std::size_t>(b.size()) * sizeof(double);
  return total;
}

void accumulate(AtildeSet& acc, AtildeSet&& child) {
  if (child.empty()) return;
  if (acc.empty()) {
    acc = std::move(child);
    return;
  }
  if (acc.levels != child.levels || acc.blocks.size() != child.blocks.size())
    throw StructuralError("accumulate: mismatched ATilde level counts");
  for (std::size_t i = 0; i < acc.blocks.size(); ++i) acc.blocks[i] += child.blocks[i];
  for (std::size_t i = 0; i < acc.omega.size(); ++i) acc.omega[i] += child.omega[i];
  child = AtildeSet{};
}

void MemoryTracker::add(std::size_t bytes) {
  const std::size_t now = current_.fetch_add(bytes) + bytes;
  std::size_t seen = peak_.load();
  while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
  }
}

void AtildeStore::park(std::size_t region, AtildeSet&& set) {
  if (spill_) {
    spill_store(*spill_, region, set);
    tracker_.release(set.bytes());
    set = AtildeSet{};
  } else {
    pending_[region] = std::move(set);
  }
}

AtildeSet AtildeStore::fetch(std::size_t region) {
  if (!spill_) return std::move(pending_[region]);
  AtildeSet set = spill_load(*spill_, region);
  tracker_.add(set.bytes());
  return set;
}

AtildeSet sum_sets(std::vector<AtildeSet> sets, MemoryTracker& tracker) {
  AtildeSet acc;
  for (AtildeSet& set : sets) {
    const std::size_t bytes = set.bytes();
    const bool adopt = acc.empty();
    accumulate(acc, std::move(set));
    if (!adopt) tracker.release(bytes);
  }
  return acc;
}

void MemoryTracker::release(std::size_t bytes) { current_.fetch_sub(bytes); }

double gaussian_loglik(std::size_t n, double log_det, double quad) {
  return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + log_det + quad);
}

Vector region_values(const PartitionTree& tree, std::size_t region, std::span<const double> y) {
  const auto& obs = tree.region(region).observations;
  Vector out(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) out(static_cast<Eigen::Index>(i)) = y[obs[i]];
  return out;
}

FinestOutcome finest_posterior(const RegionPrior& prior, const Vector& y) {
  FinestOutcome out;
  const Eigen::Index n = prior.knots();
  if (n == 0) return out;
  const int levels = prior.level - 1;
  const Eigen::Index anc = prior.ancestor_columns();

  Matrix w(n, anc + 1);
  w.leftCols(anc) = prior.ancestor_blocks();
  w.col(anc) = y;
  prior.chol.matrixL().solveInPlace(w);

  out.log_det = prior.log_det;
  out.quad = w.col(anc).squaredNorm();
  if (levels == 0) return out;

  const Eigen::Index width = anc / levels;
  AtildeSet& a = out.atilde;
  a.levels = levels;
  a.blocks.resize(AtildeSet::block_count(levels));
  a.omega.resize(static_cast<std::size_t>(levels));
  for (int k = 1; k <= levels; ++k) {
    const auto wk = w.middleCols((k - 1) * width, width);
    for (int l = k; l <= levels; ++l)
      a.block(k, l).noalias() = wk.transpose() * w.middleCols((l - 1) * width, width);
    a.omega[static_cast<std::size_t>(k - 1)].noalias() = wk.transpose() * w.col(anc);
  }
  return out;
}

MergeOutcome merge_region(const RegionPrior& prior, AtildeSet summed, bool keep_for_prediction,
                          const std::string& region_label) {
  MergeOutcome out;
  const int m = prior.level;
  const Eigen::Index r = prior.knots();

  if (summed.empty()) {
    if (keep_for_prediction) {
      RegionPosterior kept;
      kept.precision_chol = prior.chol;
      kept.cross = Matrix::Zero(prior.ancestor_columns(), r);
      kept.omega = Vector::Zero(r);
      out.kept = std::move(kept);
    }
    return out;
  }
  if (summed.levels != m) throw StructuralError(region_label + ": child moments cover the wrong levels");

  Matrix precision = prior.own_covariance() + summed.block(m, m);
  Eigen::LLT<Matrix> chol;
  if (!factor_positive_definite(precision, chol)) {
    throw NumericalError(region_label + ": posterior precision is not positive definite; "
                         "try a larger TAU or fewer knots");
  }
  out.log_det = 2.0 * chol.matrixLLT().diagonal().array().log().sum() - prior.log_det;

  const Eigen::Index width = prior.ancestor_columns() / std::max(m - 1, 1);
  const Eigen::Index anc = prior.ancestor_columns();
  Matrix h(r, anc + 1);
  for (int k = 1; k < m; ++k) h.middleCols((k - 1) * width, width) = summed.block(k, m).transpose();
  h.col(anc) = summed.omega[static_cast<std::size_t>(m - 1)];
  chol.matrixL().solveInPlace(h);
  out.quad = -h.col(anc).squaredNorm();

  if (keep_for_prediction) {
    RegionPosterior kept;
    kept.cross.resize(anc, r);
    for (int k = 1; k < m; ++k) kept.cross.middleRows((k - 1) * width, width) = summed.block(k, m);
    kept.omega = summed.omega[static_cast<std::size_t>(m - 1)];
    kept.precision_chol = std::move(chol);
    out.kept = std::move(kept);
  }

  const int up = m - 1;
  if (up == 0) return out;
  AtildeSet& a = out.atilde;
  a.levels = up;
  a.blocks.reserve(AtildeSet::block_count(up));
  for (int k = 1; k <= up; ++k) {
    const auto hk = h.middleCols((k - 1) * width, width);
    for (int l = k; l <= up; ++l) {
      Matrix& block = summed.block(k, l);
      block.noalias() -= hk.transpose() * h.middleCols((l - 1) * width, width);
      a.blocks.push_back(std::move(block));
    }
    Vector& omega = summed.omega[static_cast<std::size_t>(k - 1)];
    omega.noalias() -= hk.transpose() * h.col(anc);
    a.omega.push_back(std::move(omega));
  }
  return out;
}

namespace {

std::string region_label(const PartitionTree& tree, std::size_t region) {
  return "region (" + tree.region_id(region).to_string() + ")";
}

}  // namespace

PosteriorQuantities posterior_pass(const PartitionTree& tree, const PriorQuantities& prior,
                                   std::span<const double> y, const PosteriorOptions& options) {
  MemoryTracker local_tracker;
  MemoryTracker& tracker = options.tracker ? *options.tracker : local_tracker;
  const int levels = tree.levels();

  PosteriorQuantities post;
  post.observations = tree.retained_count();
  post.region_log_det.assign(tree.region_count(), 0.0);
  post.region_quad.assign(tree.region_count(), 0.0);
  post.resident_after_level.assign(static_cast<std::size_t>(levels + 1), 0);
  if (options.keep_for_prediction) post.regions.resize(tree.region_count());

  AtildeStore store(tree.region_count(), options.spill_directory, tracker);

  const std::size_t finest_begin = tree.level_begin(levels);
  for (std::size_t id = finest_begin; id < tree.region_count(); ++id) {
    FinestOutcome outcome = finest_posterior(prior[id], region_values(tree, id, y));
    post.region_log_det[id] = outcome.log_det;
    post.region_quad[id] = outcome.quad;
    tracker.add(outcome.atilde.bytes());
    store.park(id, std::move(outcome.atilde));
  }
  post.resident_after_level[static_cast<std::size_t>(levels)] = tracker.current();

  for (int level = levels - 1; level >= 1; --level) {
    const std::size_t begin = tree.level_begin(level);
    const std::size_t end = begin + tree.level_size(level);
    for (std::size_t id = begin; id < end; ++id) {
      std::vector<AtildeSet> sets;
      for (std::size_t child : tree.children(id)) sets.push_back(store.fetch(child));
      AtildeSet acc = sum_sets(std::move(sets), tracker);
      const std::size_t before = acc.bytes();
      MergeOutcome outcome =
          merge_region(prior[id], std::move(acc), options.keep_for_prediction, region_label(tree, id));
      tracker.release(before - outcome.atilde.bytes());
      post.region_log_det[id] = outcome.log_det;
      post.region_quad[id] = outcome.quad;
      if (options.keep_for_prediction) post.regions[id] = std::move(outcome.kept);
      if (level > 1) store.park(id, std::move(outcome.atilde));
    }
    post.resident_after_level[static_cast<std::size_t>(level)] = tracker.current();
  }

  for (std::size_t id = 0; id < tree.region_count(); ++id) {
    post.log_det += post.region_log_det[id];
    post.quad += post.region_quad[id];
  }
  post.loglik = gaussian_loglik(post.observations, post.log_det, post.quad);
  return post;
}

double loglikelihood(const PartitionTree& tree, const CovarianceParams& params,
                     std::span<const double> y) {
  const PriorQuantities prior = compute_prior(tree, params);
  return posterior_pass(tree, prior, y).loglik;
}

}  // namespace mra
