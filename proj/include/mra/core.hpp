#pragma once

#include <atomic>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mra/data_io.hpp"
#include "mra/kernel.hpp"
#include "mra/partition.hpp"

namespace mra {

/// Prior quantities of one region at level m with ancestors a_1..a_{m-1}.
///
/// `R` holds the blocks C_l(Q_self, Q_{a_l}) for l = 1..m-1 side by side,
/// followed by K = C_m(Q_self, Q_self); ancestor block l occupies columns
/// [(l-1) r_hat, l r_hat). `chol` factors K, plus the nugget at the finest
/// level. `Z` stacks K_{a_k}^{-1} C_k(Q_{a_k}, Q_self) for k < m and is only
/// kept for pre-finest regions, where descendants need it.
struct RegionPrior {
  int level = 0;
  bool computed = false;
  Matrix R;
  Matrix Z;
  Eigen::LLT<Matrix> chol;
  double log_det = 0.0;

  Eigen::Index knots() const { return R.rows(); }
  Eigen::Index ancestor_columns() const { return R.cols() - R.rows(); }
  auto ancestor_blocks() const { return R.leftCols(ancestor_columns()); }
  auto own_covariance() const { return R.rightCols(R.rows()); }
};

using PriorQuantities = std::vector<RegionPrior>;

/// Factors `a`; false when it is not numerically positive definite (a pivot
/// below sqrt(1e-14 * max diagonal), a failed factorization, or non-finite entries).
bool factor_positive_definite(const Matrix& a, Eigen::LLT<Matrix>& chol);

/// Computes one region's prior; its ancestors must already be in `prior`.
RegionPrior compute_region_prior(const PartitionTree& tree, std::size_t region,
                                 const CovarianceParams& params, const PriorQuantities& prior);

/// Descending pass over every region.
PriorQuantities compute_prior(const PartitionTree& tree, const CovarianceParams& params);

/// Ascending-pass moments of a region over ancestor levels 1..levels: blocks
/// (k, l) for k <= l packed k-major, and one omega vector per level. An empty
/// set stands for zero blocks (an empty finest region).
struct AtildeSet {
  int levels = 0;
  std::vector<Matrix> blocks;
  std::vector<Vector> omega;

  bool empty() const { return blocks.empty() && omega.empty(); }
  static std::size_t block_count(int levels) {
    return static_cast<std::size_t>(levels) * static_cast<std::size_t>(levels + 1) / 2;
  }
  static std::size_t index(int k, int l, int levels);
  Matrix& block(int k, int l) { return blocks[index(k, l, levels)]; }
  const Matrix& block(int k, int l) const { return blocks[index(k, l, levels)]; }
  std::size_t bytes() const;
};

/// Adds `child` into `acc`; an empty accumulator adopts the child's storage.
void accumulate(AtildeSet& acc, AtildeSet&& child);

/// Resident-byte accounting for ATilde blocks.
class MemoryTracker {
 public:
  void add(std::size_t bytes);
  void release(std::size_t bytes);
  std::size_t current() const { return current_.load(); }
  std::size_t peak() const { return peak_.load(); }

 private:
  std::atomic<std::size_t> current_{0};
  std::atomic<std::size_t> peak_{0};
};

/// Holds finished ATilde sets until their parent consumes them, in memory or
/// spilled to disk, keeping `tracker` in step with resident bytes.
class AtildeStore {
 public:
  AtildeStore(std::size_t regions, std::optional<std::string> spill_directory, MemoryTracker& tracker)
      : pending_(regions), spill_(std::move(spill_directory)), tracker_(tracker) {}

  /// `set` must already be counted by the tracker.
  void park(std::size_t region, AtildeSet&& set);
  AtildeSet fetch(std::size_t region);

 private:
  std::vector<AtildeSet> pending_;
  std::optional<std::string> spill_;
  MemoryTracker& tracker_;
};

/// Sums `sets` into the first, releasing the storage of the others.
AtildeSet sum_sets(std::vector<AtildeSet> sets, MemoryTracker& tracker);

/// Upper bound J^(M-1) M (M-1) r^2 2^-28 GiB on resident ATilde memory.
double estimate_memory_gib(int partitions, int levels, int knots);

/// Stored per pre-finest region when predictions are needed.
struct RegionPosterior {
  Eigen::LLT<Matrix> precision_chol;  // of K + A^(m,m)
  Matrix cross;                       // stacked A^(l,m), l < m
  Vector omega;                       // omega^(m)
};

struct FinestOutcome {
  AtildeSet atilde;
  double log_det = 0.0;
  double quad = 0.0;
};

FinestOutcome finest_posterior(const RegionPrior& prior, const Vector& y);

struct MergeOutcome {
  AtildeSet atilde;
  double log_det = 0.0;
  double quad = 0.0;
  std::optional<RegionPosterior> kept;
};

/// Finishes an interior region from the summed child moments (levels 1..m)
/// and returns the moments it passes up (levels 1..m-1). Reuses the storage of
/// `summed`. `region_label` names the region in numerical diagnostics.
MergeOutcome merge_region(const RegionPrior& prior, AtildeSet summed, bool keep_for_prediction,
                          const std::string& region_label);

/// Values of the observations in a finest region, in knot order.
Vector region_values(const PartitionTree& tree, std::size_t region, std::span<const double> y);

struct PosteriorOptions {
  bool keep_for_prediction = false;
  std::optional<std::string> spill_directory;
  MemoryTracker* tracker = nullptr;
};

struct PosteriorQuantities {
  double loglik = 0.0;
  double log_det = 0.0;  // log |Sigma + tau I|
  double quad = 0.0;     // y^T (Sigma + tau I)^{-1} y
  std::size_t observations = 0;
  std::vector<double> region_log_det;
  std::vector<double> region_quad;
  std::vector<std::optional<RegionPosterior>> regions;
  /// Resident ATilde bytes after finishing each level (index = level).
  std::vector<std::size_t> resident_after_level;
};

double gaussian_loglik(std::size_t n, double log_det, double quad);

/// Ascending pass. `y` is indexed like the observation list the tree was built from.
PosteriorQuantities posterior_pass(const PartitionTree& tree, const PriorQuantities& prior,
                                   std::span<const double> y, const PosteriorOptions& options = {});

double loglikelihood(const PartitionTree& tree, const CovarianceParams& params,
                     std::span<const double> y);

/// Posterior mean and joint covariance of eta for one pre-finest region given
/// the data: `cov[k]` is Cov(eta_self, eta_{a_{k+1}}) for k < m-1 and
/// `cov[m-1]` is Var(eta_self).
struct ChainRow {
  Vector mean;
  std::vector<Matrix> cov;
};

/// `ancestors` holds the rows of a_1..a_{m-1}, in level order.
ChainRow chain_row(const RegionPosterior& posterior, std::span<const ChainRow* const> ancestors);

struct PointPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Joint posterior of the eta vectors along one ancestor chain.
struct ChainSummary {
  Vector mean;
  Matrix cov;
};
ChainSummary summarize_chain(std::span<const ChainRow* const> rows);

/// Prediction at p inside finest region `finest`; `chain` summarizes the rows
/// of its ancestors in level order.
PointPrediction predict_point(const PartitionTree& tree, const PriorQuantities& prior,
                              const ChainSummary& chain, std::size_t finest,
                              const Vector& y_finest, const CovarianceParams& params, Point p);

/// Kriging under the approximated prior. Locations outside the domain yield NaN.
PredictionResults predict(const PartitionTree& tree, const CovarianceParams& params,
                          std::span<const double> y, const PointList& locations);

}  // namespace mra
