#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "mopol/common.hpp"
#include "mopol/weights.hpp"

namespace mopol {

struct GpBounds {
  double lengthscale_min = 1e-3;
  double lengthscale_max = 10.0;
  double signal_min = 1e-6;
  double signal_max = 10.0;
};

struct GpHyperparameters {
  std::vector<double> lengthscales;
  double signal_variance = 1.0;
};

// Minimizes f by Nelder-Mead from x0 with initial step `step`.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                                       double step = 0.5, int max_evals = 400, double ftol = 1e-9) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step;
  std::vector<double> fv(n + 1);
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);
  std::vector<std::size_t> order(n + 1);
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    if (std::abs(fv[worst] - fv[best]) <= ftol * (1.0 + std::abs(fv[best]))) break;
    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);
    auto along = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t k = 0; k < n; ++k) x[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
      return x;
    };
    auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      simplex[worst] = xr;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      auto xc = along(outside ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[worst])) {
        simplex[worst] = xc;
        fv[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == best) continue;
          for (std::size_t k = 0; k < n; ++k) simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
          fv[i] = eval(simplex[i]);
        }
      }
    }
  }
  const auto it = std::min_element(fv.begin(), fv.end());
  return simplex[static_cast<std::size_t>(it - fv.begin())];
}

// Single-output GP regression with a Matern-5/2 ARD kernel, constant mean and
// fixed per-point observation noise. Targets are standardized internally;
// every public quantity is in original units.
class GaussianProcess {
 public:
  static double matern52(double r) {
    const double s = std::sqrt(5.0) * r;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
  }

  // Fits kernel hyperparameters by maximizing the marginal likelihood from a
  // fixed grid of starting points. noise_var is in original units.
  void fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, const Eigen::VectorXd& noise_var, const GpBounds& bounds = {}) {
    set_data(inputs, targets, noise_var, bounds);
    const std::size_t D = static_cast<std::size_t>(X_.cols());
    auto to_params = [&](const std::vector<double>& z) {
      GpHyperparameters h;
      h.lengthscales.resize(D);
      for (std::size_t j = 0; j < D; ++j) h.lengthscales[j] = squash(z[j], bounds_.lengthscale_min, bounds_.lengthscale_max);
      h.signal_variance = squash(z[D], bounds_.signal_min, bounds_.signal_max);
      return h;
    };
    auto objective = [&](const std::vector<double>& z) { return negative_log_likelihood(to_params(z)); };

    double best_nll = std::numeric_limits<double>::infinity();
    GpHyperparameters best{std::vector<double>(D, 0.3), 1.0};
    for (double ell : {0.1, 0.3, 1.0}) {
      std::vector<double> z0(D + 1);
      for (std::size_t j = 0; j < D; ++j) z0[j] = unsquash(ell, bounds_.lengthscale_min, bounds_.lengthscale_max);
      z0[D] = unsquash(1.0, bounds_.signal_min, bounds_.signal_max);
      const auto z = nelder_mead(objective, z0, 0.8);
      const auto h = to_params(z);
      const double v = negative_log_likelihood(h);
      if (v < best_nll) {
        best_nll = v;
        best = h;
      }
    }
    set_hyperparameters(best);
  }

  // Conditions on the data with given hyperparameters (no optimization).
  void condition(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, const Eigen::VectorXd& noise_var,
                 const GpHyperparameters& h) {
    set_data(inputs, targets, noise_var, {});
    set_hyperparameters(h);
  }

  std::size_t size() const { return static_cast<std::size_t>(X_.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(X_.cols()); }
  const Eigen::MatrixXd& inputs() const { return X_; }
  const GpHyperparameters& hyperparameters() const { return hyper_; }
  // Prior variance in original units.
  double signal_variance() const { return hyper_.signal_variance * y_scale_ * y_scale_; }
  double mean_constant() const { return y_shift_ + y_scale_ * mean_; }
  double jitter() const { return jitter_; }
  double log_marginal_likelihood() const { return -nll_; }

  // Prior covariance between rows of A and rows of B, in standardized units.
  Eigen::MatrixXd kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) const { return kernel(hyper_, A, B); }

  static Eigen::MatrixXd kernel(const GpHyperparameters& h, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd K(A.rows(), B.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      for (Eigen::Index j = 0; j < B.rows(); ++j) {
        double r2 = 0.0;
        for (Eigen::Index k = 0; k < A.cols(); ++k) {
          const double t = (A(i, k) - B(j, k)) / h.lengthscales[static_cast<std::size_t>(k)];
          r2 += t * t;
        }
        K(i, j) = h.signal_variance * matern52(std::sqrt(r2));
      }
    return K;
  }

  Eigen::VectorXd posterior_mean(const Eigen::MatrixXd& P) const {
    Eigen::VectorXd m = kernel(P, X_) * alpha_;
    m.array() += mean_;
    return (m.array() * y_scale_ + y_shift_).matrix();
  }

  // Joint posterior covariance of the latent function at the rows of P.
  Eigen::MatrixXd posterior_covariance(const Eigen::MatrixXd& P) const { return posterior_cross(P, P); }

  Eigen::MatrixXd posterior_cross(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) const {
    const Eigen::MatrixXd VA = solve_lower(kernel(X_, A));
    const Eigen::MatrixXd VB = (&A == &B) ? VA : solve_lower(kernel(X_, B));
    Eigen::MatrixXd C = kernel(A, B) - VA.transpose() * VB;
    return C * (y_scale_ * y_scale_);
  }

  // L^{-1} K(X, .) with L the Cholesky factor of the training covariance.
  Eigen::MatrixXd solve_lower(const Eigen::MatrixXd& KxB) const { return L_.triangularView<Eigen::Lower>().solve(KxB); }

  double y_scale() const { return y_scale_; }

 private:
  static double squash(double z, double lo, double hi) {
    const double llo = std::log(lo), lhi = std::log(hi);
    return std::exp(llo + (lhi - llo) / (1.0 + std::exp(-z)));
  }
  static double unsquash(double v, double lo, double hi) {
    const double llo = std::log(lo), lhi = std::log(hi);
    const double t = std::clamp((std::log(v) - llo) / (lhi - llo), 1e-9, 1.0 - 1e-9);
    return std::log(t / (1.0 - t));
  }

  void set_data(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, const Eigen::VectorXd& noise_var, const GpBounds& bounds) {
    if (inputs.rows() < 1 || inputs.rows() != targets.size() || inputs.rows() != noise_var.size())
      fail_validation("GP data sizes disagree");
    for (Eigen::Index i = 0; i < noise_var.size(); ++i)
      if (!(noise_var(i) >= 0.0) || !std::isfinite(targets(i))) fail_validation("GP targets must be finite and noise >= 0");
    X_ = inputs;
    bounds_ = bounds;
    y_shift_ = targets.mean();
    const double var = (targets.array() - y_shift_).square().sum() / std::max<double>(1.0, static_cast<double>(targets.size() - 1));
    y_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
    y_ = (targets.array() - y_shift_) / y_scale_;
    noise_ = noise_var / (y_scale_ * y_scale_);
  }

  // Cholesky of sigma^2 M + diag(noise) + jitter I with jitter escalating
  // 1e-10 -> 1e-4 by decades. Returns false if all attempts fail.
  bool factor(const GpHyperparameters& h, Eigen::LLT<Eigen::MatrixXd>& llt, double& jitter) const {
    Eigen::MatrixXd K = kernel(h, X_, X_);
    K.diagonal() += noise_;
    for (jitter = 1e-10; jitter <= 1e-4 * 1.0000001; jitter *= 10.0) {
      Eigen::MatrixXd Kj = K;
      Kj.diagonal().array() += jitter;
      llt.compute(Kj);
      if (llt.info() == Eigen::Success && (llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) return true;
    }
    return false;
  }

  double negative_log_likelihood(const GpHyperparameters& h) const {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jit = 0.0;
    if (!factor(h, llt, jit)) return std::numeric_limits<double>::infinity();
    const Eigen::Index m = X_.rows();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
    const Eigen::VectorXd kinv1 = llt.solve(ones);
    const Eigen::VectorXd kinvy = llt.solve(y_);
    const double mu = kinvy.sum() / kinv1.sum();
    const Eigen::VectorXd r = y_.array() - mu;
    const Eigen::VectorXd kinvr = llt.solve(r);
    const auto L = llt.matrixL().toDenseMatrix();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) logdet += std::log(L(i, i));
    return 0.5 * r.dot(kinvr) + logdet + 0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi);
  }

  void set_hyperparameters(const GpHyperparameters& h) {
    if (h.lengthscales.size() != static_cast<std::size_t>(X_.cols())) fail_validation("GP needs one lengthscale per input dimension");
    for (double l : h.lengthscales)
      if (!(l > 0.0)) fail_validation("GP lengthscales must be positive");
    if (!(h.signal_variance > 0.0)) fail_validation("GP signal variance must be positive");
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!factor(h, llt, jitter_)) throw std::runtime_error("GP covariance is not positive definite even with jitter 1e-4");
    hyper_ = h;
    L_ = llt.matrixL();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(X_.rows());
    const Eigen::VectorXd kinv1 = llt.solve(ones);
    mean_ = llt.solve(y_).sum() / kinv1.sum();
    alpha_ = llt.solve((y_.array() - mean_).matrix());
    nll_ = negative_log_likelihood(h);
  }

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_, noise_, alpha_;
  Eigen::MatrixXd L_;
  GpBounds bounds_;
  GpHyperparameters hyper_{{}, 1.0};
  double y_shift_ = 0.0, y_scale_ = 1.0, mean_ = 0.0, jitter_ = 0.0, nll_ = 0.0;
};

struct Observation {
  WeightVector lambda;
  std::vector<double> values;
  std::vector<double> ses;
};

// One independent GP per objective over simplex coordinates.
class GPModel {
 public:
  std::size_t objectives() const { return gps_.size(); }
  std::size_t dims() const { return gps_.empty() ? 0 : gps_.front().dims(); }
  const GaussianProcess& output(std::size_t k) const { return gps_.at(k); }
  GaussianProcess& output(std::size_t k) { return gps_.at(k); }
  const Eigen::MatrixXd& inputs() const { return gps_.front().inputs(); }

  static Eigen::MatrixXd coordinates(const std::vector<WeightVector>& lambdas) {
    if (lambdas.empty()) return {};
    const std::size_t D = lambdas.front().size() - 1;
    Eigen::MatrixXd C(static_cast<Eigen::Index>(lambdas.size()), static_cast<Eigen::Index>(D));
    for (std::size_t i = 0; i < lambdas.size(); ++i)
      for (std::size_t j = 0; j < D; ++j) C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = lambdas[i][j];
    return C;
  }

  void add_output(GaussianProcess gp) { gps_.push_back(std::move(gp)); }

 private:
  std::vector<GaussianProcess> gps_;
};

inline GPModel gp_fit(const std::vector<Observation>& obs, const GpBounds& bounds = {}) {
  if (obs.size() < 2) fail_validation("gp_fit needs at least 2 observations, got ", obs.size());
  const std::size_t K = obs.front().values.size();
  std::vector<WeightVector> lambdas;
  for (const auto& o : obs) {
    if (o.values.size() != K || o.ses.size() != K || o.lambda.size() != K)
      fail_validation("gp_fit: observation dimensions disagree");
    lambdas.push_back(o.lambda);
  }
  const Eigen::MatrixXd X = GPModel::coordinates(lambdas);
  GPModel model;
  for (std::size_t k = 0; k < K; ++k) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(obs.size())), nv(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
      y(static_cast<Eigen::Index>(i)) = obs[i].values[k];
      nv(static_cast<Eigen::Index>(i)) = obs[i].ses[k] * obs[i].ses[k];
    }
    GaussianProcess gp;
    gp.fit(X, y, nv, bounds);
    model.add_output(std::move(gp));
  }
  return model;
}

struct Posterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// Per-objective joint posterior of the latent values at the probes.
inline std::vector<Posterior> gp_posterior(const GPModel& model, const std::vector<WeightVector>& probes) {
  const Eigen::MatrixXd P = GPModel::coordinates(probes);
  std::vector<Posterior> out;
  for (std::size_t k = 0; k < model.objectives(); ++k) {
    const auto& gp = model.output(k);
    out.push_back({gp.posterior_mean(P), gp.posterior_covariance(P)});
  }
  return out;
}

}  // namespace mopol
