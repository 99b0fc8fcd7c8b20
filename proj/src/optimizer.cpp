#include "mra/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mra/errors.hpp"

namespace mra {

namespace {

/// Maps between natural coordinates and the unit box.
class Scaling {
 public:
  explicit Scaling(const BoxProblem& p) : lower_(p.lower), upper_(p.upper) {
    const std::size_t n = p.lower.size();
    log_.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      log_[i] = i < p.log_scale.size() && p.log_scale[i] && p.lower[i] > 0.0;
      if (!log_[i]) continue;
      lower_[i] = std::log(p.lower[i]);
      upper_[i] = std::log(p.upper[i]);
    }
  }

  Vector to_unit(const std::vector<double>& x) const {
    Vector u(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = log_[i] ? std::log(x[i]) : x[i];
      u(static_cast<Eigen::Index>(i)) = std::clamp((v - lower_[i]) / (upper_[i] - lower_[i]), 0.0, 1.0);
    }
    return u;
  }

  std::vector<double> to_natural(const Vector& u, const BoxProblem& p) const {
    std::vector<double> x(static_cast<std::size_t>(u.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = lower_[i] + std::clamp(u(static_cast<Eigen::Index>(i)), 0.0, 1.0) * (upper_[i] - lower_[i]);
      x[i] = std::clamp(log_[i] ? std::exp(v) : v, p.lower[i], p.upper[i]);
    }
    return x;
  }

 private:
  std::vector<double> lower_, upper_;
  std::vector<bool> log_;
};

/// Quadratic basis [1, d, d_i d_j (i <= j)].
Vector basis(const Vector& d) {
  const Eigen::Index n = d.size();
  Vector phi(1 + n + n * (n + 1) / 2);
  Eigen::Index k = 0;
  phi(k++) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) phi(k++) = d(i);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) phi(k++) = (i == j ? 0.5 : 1.0) * d(i) * d(j);
  return phi;
}

struct Model {
  double c = 0.0;
  Vector g;
  Matrix h;
  double value(const Vector& s) const { return c + g.dot(s) + 0.5 * s.dot(h * s); }
};

Model unpack(const Vector& coef, Eigen::Index n) {
  Model m;
  m.c = coef(0);
  m.g = coef.segment(1, n);
  m.h = Matrix::Zero(n, n);
  Eigen::Index k = 1 + n;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      m.h(i, j) = coef(k);
      m.h(j, i) = coef(k);
      ++k;
    }
  return m;
}

/// Maximizes a quadratic over the box [lo, hi] by checking the stationary
/// point of every face (each coordinate at its lower bound, upper bound, or free).
Vector box_qp(const Model& m, const Vector& lo, const Vector& hi) {
  const Eigen::Index n = m.g.size();
  std::size_t faces = 1;
  for (Eigen::Index i = 0; i < n; ++i) faces *= 3;
  Vector best = Vector::Zero(n);
  double best_value = m.value(best);
  for (std::size_t code = 0; code < faces; ++code) {
    Vector s(n);
    std::vector<Eigen::Index> free;
    std::size_t c = code;
    for (Eigen::Index i = 0; i < n; ++i, c /= 3) {
      if (c % 3 == 0) s(i) = lo(i);
      else if (c % 3 == 1) s(i) = hi(i);
      else {
        s(i) = 0.0;
        free.push_back(i);
      }
    }
    if (!free.empty()) {
      const auto k = static_cast<Eigen::Index>(free.size());
      Matrix hf(k, k);
      Vector rhs(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        rhs(a) = -m.g(free[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < n; ++b)
          if (std::find(free.begin(), free.end(), b) == free.end())
            rhs(a) -= m.h(free[static_cast<std::size_t>(a)], b) * s(b);
        for (Eigen::Index b = 0; b < k; ++b)
          hf(a, b) = m.h(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
      }
      const Vector sf = hf.completeOrthogonalDecomposition().solve(rhs);
      bool inside = sf.allFinite();
      for (Eigen::Index a = 0; a < k && inside; ++a) {
        const Eigen::Index i = free[static_cast<std::size_t>(a)];
        inside = sf(a) >= lo(i) - 1e-12 && sf(a) <= hi(i) + 1e-12;
        s(i) = std::clamp(sf(a), lo(i), hi(i));
      }
      if (!inside) continue;
    }
    const double v = m.value(s);
    if (v > best_value) {
      best_value = v;
      best = s;
    }
  }
  return best;
}

class Search {
 public:
  explicit Search(const BoxProblem& p) : p_(p), scale_(p), n_(static_cast<Eigen::Index>(p.lower.size())) {}

  BoxResult run() {
    const Vector x0 = scale_.to_unit(p_.initial);
    const double f0 = evaluate(x0);
    if (!std::isfinite(f0)) {
      throw NumericalError("optimization: objective is not finite at the initial guess");
    }
    add(x0, f0);
    delta_ = p_.initial_radius;
    initial_design(x0);

    while (evals_ < p_.max_evaluations && delta_ >= p_.final_radius) {
      const Vector& xb = points_[best_];
      Model m = fit(xb);
      Vector lo(n_), hi(n_);
      for (Eigen::Index i = 0; i < n_; ++i) {
        lo(i) = std::max(-delta_, -xb(i)) / delta_;
        hi(i) = std::min(delta_, 1.0 - xb(i)) / delta_;
      }
      const Vector step = box_qp(m, lo, hi);
      const double predicted = m.value(step) - m.value(Vector::Zero(n_));
      if (step.lpNorm<Eigen::Infinity>() < 1e-3 || !(predicted > 1e-14 * (1.0 + std::abs(values_[best_])))) {
        if (!improve_geometry()) delta_ *= 0.5;
        continue;
      }
      const Vector x = xb + delta_ * step;
      const double f = evaluate(x);
      if (!std::isfinite(f)) {
        delta_ *= 0.5;
        continue;
      }
      const double ratio = (f - values_[best_]) / predicted;
      insert(x, f);
      if (ratio < 0.1) {
        if (!improve_geometry()) delta_ *= 0.5;
      } else if (ratio > 0.7 && step.lpNorm<Eigen::Infinity>() > 0.9) {
        delta_ = std::min(2.0 * delta_, 0.5);
      }
    }

    BoxResult out;
    out.best = scale_.to_natural(points_[best_], p_);
    out.value = values_[best_];
    out.evaluations = evals_;
    out.converged = delta_ < p_.final_radius;
    return out;
  }

 private:
  std::size_t target_points() const {
    return static_cast<std::size_t>((n_ + 1) * (n_ + 2) / 2);
  }

  double evaluate(const Vector& u) {
    const std::vector<double> x = scale_.to_natural(u, p_);
    ++evals_;
    const double f = p_.objective(x);
    if (p_.on_evaluation) p_.on_evaluation(evals_, x, f);
    return f;
  }

  void add(const Vector& u, double f) {
    points_.push_back(u);
    values_.push_back(f);
    if (values_.back() > values_[best_]) best_ = points_.size() - 1;
  }

  void initial_design(const Vector& x0) {
    Vector dir(n_);
    for (Eigen::Index i = 0; i < n_ && evals_ < p_.max_evaluations; ++i) {
      dir(i) = x0(i) + delta_ <= 1.0 ? 1.0 : -1.0;
      for (double mult : {1.0, -1.0}) {
        Vector x = x0;
        double t = x0(i) + mult * dir(i) * delta_;
        if (t < 0.0 || t > 1.0) t = x0(i) + 2.0 * dir(i) * delta_;
        x(i) = std::clamp(t, 0.0, 1.0);
        try_add(x);
        if (evals_ >= p_.max_evaluations) return;
      }
    }
    for (Eigen::Index i = 0; i < n_; ++i)
      for (Eigen::Index j = i + 1; j < n_; ++j) {
        if (evals_ >= p_.max_evaluations) return;
        Vector x = x0;
        x(i) = std::clamp(x0(i) + dir(i) * delta_, 0.0, 1.0);
        x(j) = std::clamp(x0(j) + dir(j) * delta_, 0.0, 1.0);
        try_add(x);
      }
  }

  void try_add(const Vector& x) {
    for (const Vector& q : points_)
      if ((q - x).lpNorm<Eigen::Infinity>() < 1e-14) return;
    const double f = evaluate(x);
    if (std::isfinite(f)) add(x, f);
  }

  Matrix design(const Vector& center) const {
    Matrix a(static_cast<Eigen::Index>(points_.size()), static_cast<Eigen::Index>(target_points()));
    for (std::size_t k = 0; k < points_.size(); ++k)
      a.row(static_cast<Eigen::Index>(k)) = basis((points_[k] - center) / delta_).transpose();
    return a;
  }

  Model fit(const Vector& center) const {
    Vector f(static_cast<Eigen::Index>(values_.size()));
    for (std::size_t k = 0; k < values_.size(); ++k) f(static_cast<Eigen::Index>(k)) = values_[k];
    return unpack(design(center).completeOrthogonalDecomposition().solve(f), n_);
  }

  /// Lagrange values of all interpolation points at x.
  Vector lagrange(const Vector& x) const {
    const Vector& center = points_[best_];
    return design(center).transpose().completeOrthogonalDecomposition().solve(basis((x - center) / delta_));
  }

  void insert(const Vector& x, double f) {
    if (points_.size() < target_points()) {
      add(x, f);
      return;
    }
    const Vector ell = lagrange(x);
    const Vector& anchor = f > values_[best_] ? x : points_[best_];
    std::size_t drop = 0;
    double score = -1.0;
    for (std::size_t k = 0; k < points_.size(); ++k) {
      if (k == best_ && !(f > values_[best_])) continue;
      const double dist = (points_[k] - anchor).lpNorm<Eigen::Infinity>() / delta_;
      const double s = std::abs(ell(static_cast<Eigen::Index>(k))) * std::max(1.0, dist * dist * dist * dist);
      if (s > score) {
        score = s;
        drop = k;
      }
    }
    points_[drop] = x;
    values_[drop] = f;
    best_ = static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) - values_.begin());
  }

  /// Replaces the interpolation point farthest from the best one, when it lies
  /// outside 2 * delta, by the cube vertex or axis point that maximizes its
  /// Lagrange function. Returns false when no point is that far.
  bool improve_geometry() {
    if (evals_ >= p_.max_evaluations) return false;
    const Vector xb = points_[best_];
    std::size_t far = best_;
    double far_dist = 2.0 * delta_;
    for (std::size_t k = 0; k < points_.size(); ++k) {
      const double d = (points_[k] - xb).lpNorm<Eigen::Infinity>();
      if (d > far_dist) {
        far_dist = d;
        far = k;
      }
    }
    if (far == best_) return false;

    std::size_t codes = 1;
    for (Eigen::Index i = 0; i < n_; ++i) codes *= 3;
    Vector pick = xb;
    double pick_value = -1.0;
    for (std::size_t code = 1; code < codes; ++code) {
      Vector x = xb;
      std::size_t c = code;
      for (Eigen::Index i = 0; i < n_; ++i, c /= 3)
        x(i) = std::clamp(xb(i) + (static_cast<double>(c % 3) - 1.0) * delta_, 0.0, 1.0);
      if ((x - xb).lpNorm<Eigen::Infinity>() < 1e-14) continue;
      const double v = std::abs(lagrange(x)(static_cast<Eigen::Index>(far)));
      if (v > pick_value) {
        pick_value = v;
        pick = x;
      }
    }
    const double f = evaluate(pick);
    if (!std::isfinite(f)) {
      points_.erase(points_.begin() + static_cast<std::ptrdiff_t>(far));
      values_.erase(values_.begin() + static_cast<std::ptrdiff_t>(far));
    } else {
      points_[far] = pick;
      values_[far] = f;
    }
    best_ = static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) - values_.begin());
    return true;
  }

  const BoxProblem& p_;
  Scaling scale_;
  Eigen::Index n_;
  std::vector<Vector> points_;
  std::vector<double> values_;
  std::size_t best_ = 0;
  double delta_ = 0.1;
  int evals_ = 0;
};

void check_problem(const BoxProblem& p) {
  const std::size_t n = p.lower.size();
  if (n == 0 || p.upper.size() != n || p.initial.size() != n)
    throw ConfigError("optimization: bounds and initial guess must have the same dimension");
  if (p.max_evaluations < 1) throw ConfigError("optimization: MAX_ITERATIONS must be at least 1");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(std::isfinite(p.lower[i]) && std::isfinite(p.upper[i]) && p.lower[i] <= p.upper[i])) {
      std::ostringstream msg;
      msg << "optimization: bounds of parameter " << i << " must be finite and ordered";
      throw ConfigError(msg.str());
    }
    if (!(p.initial[i] >= p.lower[i] && p.initial[i] <= p.upper[i])) {
      std::ostringstream msg;
      msg << "optimization: initial guess of parameter " << i << " lies outside its bounds";
      throw ConfigError(msg.str());
    }
  }
}

}  // namespace

BoxResult maximize_box(const BoxProblem& problem) {
  check_problem(problem);
  // Coordinates with equal bounds are held fixed.
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < problem.lower.size(); ++i)
    if (problem.upper[i] > problem.lower[i]) active.push_back(i);
  if (active.size() == problem.lower.size()) return Search(problem).run();

  BoxProblem reduced = problem;
  reduced.lower.clear();
  reduced.upper.clear();
  reduced.initial.clear();
  reduced.log_scale.clear();
  for (std::size_t i : active) {
    reduced.lower.push_back(problem.lower[i]);
    reduced.upper.push_back(problem.upper[i]);
    reduced.initial.push_back(problem.initial[i]);
    reduced.log_scale.push_back(i < problem.log_scale.size() && problem.log_scale[i]);
  }
  const auto expand = [&](const std::vector<double>& x) {
    std::vector<double> full = problem.initial;
    for (std::size_t k = 0; k < active.size(); ++k) full[active[k]] = x[k];
    return full;
  };
  if (active.empty()) {
    BoxResult out;
    out.best = problem.initial;
    out.value = problem.objective(problem.initial);
    out.evaluations = 1;
    out.converged = true;
    if (problem.on_evaluation) problem.on_evaluation(1, out.best, out.value);
    if (!std::isfinite(out.value))
      throw NumericalError("optimization: objective is not finite at the initial guess");
    return out;
  }
  reduced.objective = [&](const std::vector<double>& x) { return problem.objective(expand(x)); };
  if (problem.on_evaluation)
    reduced.on_evaluation = [&](int k, const std::vector<double>& x, double v) {
      problem.on_evaluation(k, expand(x), v);
    };
  BoxResult out = Search(reduced).run();
  out.best = expand(out.best);
  return out;
}

OptimizationResult maximize_likelihood(const OptimizationProblem& problem) {
  const auto pack = [](const CovarianceParams& c) { return std::vector<double>{c.alpha, c.beta, c.tau}; };
  const auto unpack_params = [](const std::vector<double>& x) { return CovarianceParams{x[0], x[1], x[2]}; };
  BoxProblem box;
  box.lower = pack(problem.lower);
  box.upper = pack(problem.upper);
  box.initial = pack(problem.initial);
  box.max_evaluations = problem.max_iterations;
  box.log_scale = {true, true, true};
  box.objective = [&](const std::vector<double>& x) {
    try {
      return problem.objective(unpack_params(x));
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  if (problem.on_evaluation)
    box.on_evaluation = [&](int k, const std::vector<double>& x, double v) {
      problem.on_evaluation(k, unpack_params(x), v);
    };
  const BoxResult r = maximize_box(box);
  return {unpack_params(r.best), r.value, r.evaluations, r.converged};
}

}  // namespace mra
