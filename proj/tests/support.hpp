#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mra/core.hpp"

namespace mra::test {

inline PointList random_points(std::size_t n, std::mt19937_64& rng, double x0 = 0.0, double x1 = 1.0,
                               double y0 = 0.0, double y1 = 1.0) {
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  PointList out(n);
  for (Point& p : out) p = {ux(rng), uy(rng)};
  return out;
}

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  std::vector<double> out(n);
  for (double& v : out) v = z(rng);
  return out;
}

/// Smooth surface plus white noise; cheap stand-in for GP data at large n.
inline std::vector<double> smooth_field(const PointList& points, std::mt19937_64& rng, double noise = 0.1) {
  std::normal_distribution<double> z(0.0, noise);
  std::vector<double> out;
  for (const Point& p : points)
    out.push_back(std::sin(3.0 * p.x) * std::cos(2.0 * p.y) + 0.5 * std::sin(7.0 * p.x * p.y) + z(rng));
  return out;
}

/// Exact draw from the exponential-covariance GP plus nugget, via dense Cholesky.
inline std::vector<double> simulate_gp(const PointList& points, const CovarianceParams& params,
                                       std::mt19937_64& rng) {
  Matrix k = cross_covariance_matrix(points, points, params);
  k.diagonal().array() += params.tau;
  const Eigen::LLT<Eigen::Ref<Matrix>> chol(k);  // factors in place
  std::normal_distribution<double> z;
  Vector e(static_cast<Eigen::Index>(points.size()));
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = z(rng);
  const Vector v = chol.matrixL() * e;
  return {v.data(), v.data() + v.size()};
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mra_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// Textbook GP with exponential covariance and nugget.
struct DenseGp {
  PointList points;
  Vector y;
  CovarianceParams params;

  double loglik() const {
    Matrix k = cross_covariance_matrix(points, points, params);
    k.diagonal().array() += params.tau;
    const Eigen::LLT<Matrix> chol(k);
    const double log_det = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
    return gaussian_loglik(points.size(), log_det, y.dot(chol.solve(y)));
  }

  PointPrediction predict(Point p) const {
    Matrix k = cross_covariance_matrix(points, points, params);
    k.diagonal().array() += params.tau;
    const Eigen::LLT<Matrix> chol(k);
    const Vector c = cross_covariance_matrix(points, PointList{p}, params).col(0);
    return {c.dot(chol.solve(y)), params.alpha - c.dot(chol.solve(c))};
  }
};

}  // namespace mra::test
