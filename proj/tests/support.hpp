#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <random>
#include <set>
#include <vector>

#include "mopol/mopol.hpp"

namespace testing_support {

using namespace mopol;

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mopol_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path.string();
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Instance {
  Matrix X;
  ScoreMatrix scores;
  WeightVector lambda;
};

// Uniform covariates (optionally on a coarse grid to force ties), normal
// scores, random weights.
inline Instance random_instance(Rng& rng, std::size_t n, std::size_t p, std::size_t d, std::size_t k, bool ties = false) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Instance in{Matrix(n, p), ScoreMatrix{Tensor3(n, d, k)}, {}};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const double u = unif(rng);
      in.X(i, j) = ties ? std::round(u * 3.0) / 3.0 : u;
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t w = 0; w < d; ++w)
      for (std::size_t y = 0; y < k; ++y) in.scores(i, w, y) = normal(rng);
  std::vector<double> lam(k);
  double sum = 0.0;
  for (double& v : lam) sum += (v = std::exponential_distribution<double>(1.0)(rng));
  for (double& v : lam) v /= sum;
  lam.back() = 1.0;
  for (std::size_t y = 0; y + 1 < k; ++y) lam.back() -= lam[y];
  lam.back() = std::max(0.0, lam.back());
  in.lambda = WeightVector(lam);
  return in;
}

// Every threshold that separates two distinct values of a feature.
inline std::vector<double> cut_points(const Matrix& X, std::size_t f) {
  std::set<double> vals;
  for (std::size_t i = 0; i < X.rows(); ++i) vals.insert(X(i, f));
  std::vector<double> v(vals.begin(), vals.end()), cuts;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) cuts.push_back(0.5 * (v[i] + v[i + 1]));
  return cuts;
}

// All trees of depth <= depth (<= 2) over global cut points and every leaf
// labelling, including redundant ones.
inline std::vector<PolicyTree> enumerate_trees(const Matrix& X, std::size_t d, std::size_t depth) {
  std::vector<PolicyTree> leaves;
  for (std::size_t w = 0; w < d; ++w) leaves.push_back(PolicyTree::leaf(static_cast<int>(w)));
  if (depth == 0) return leaves;
  auto stumps = [&](const std::vector<PolicyTree>& sub) {
    std::vector<PolicyTree> out;
    for (std::size_t f = 0; f < X.cols(); ++f)
      for (double t : cut_points(X, f))
        for (const auto& l : sub)
          for (const auto& r : sub) out.push_back(PolicyTree::split(static_cast<int>(f), t, l, r));
    return out;
  };
  std::vector<PolicyTree> level = leaves;
  for (std::size_t k = 1; k <= depth; ++k) {
    auto next = leaves;
    for (auto& t : stumps(level)) next.push_back(std::move(t));
    level = std::move(next);
  }
  return level;
}

// max over enumerated trees of the weighted value.
inline double brute_force_value(const Matrix& X, const ScoreMatrix& s, const WeightVector& lambda, std::size_t depth) {
  double best = -INFINITY;
  for (const auto& t : enumerate_trees(X, s.treatments(), depth)) best = std::max(best, value_weighted(t, X, s, lambda));
  return best;
}

// Hypervolume by uniform sampling of the bounding box [ref, max].
struct McEstimate {
  double value;
  double std_error;
};

inline McEstimate mc_hypervolume(const std::vector<std::vector<double>>& pts, const std::vector<double>& ref, std::size_t samples,
                                 std::uint64_t seed) {
  const std::size_t k = ref.size();
  std::vector<double> hi = ref;
  for (const auto& p : pts)
    for (std::size_t j = 0; j < k; ++j) hi[j] = std::max(hi[j], p[j]);
  double box = 1.0;
  for (std::size_t j = 0; j < k; ++j) box *= hi[j] - ref[j];
  Rng rng(seed);
  std::vector<std::uniform_real_distribution<double>> u;
  for (std::size_t j = 0; j < k; ++j) u.emplace_back(ref[j], hi[j]);
  std::size_t hits = 0;
  std::vector<double> z(k);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t j = 0; j < k; ++j) z[j] = u[j](rng);
    for (const auto& p : pts) {
      bool in = true;
      for (std::size_t j = 0; j < k && in; ++j) in = z[j] <= p[j];
      if (in) {
        ++hits;
        break;
      }
    }
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(samples);
  return {box * frac, box * std::sqrt(frac * (1.0 - frac) / static_cast<double>(samples))};
}

// Dense inverse by Gauss-Jordan elimination with partial pivoting.
inline std::vector<std::vector<double>> gauss_jordan_inverse(std::vector<std::vector<double>> A) {
  const std::size_t n = A.size();
  std::vector<std::vector<double>> I(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) I[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    std::swap(I[c], I[piv]);
    const double d = A[c][c];
    for (std::size_t j = 0; j < n; ++j) {
      A[c][j] /= d;
      I[c][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = A[r][c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        A[r][j] -= f * A[c][j];
        I[r][j] -= f * I[c][j];
      }
    }
  }
  return I;
}

inline double matern52_oracle(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& ell, double sf2) {
  double r2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) r2 += std::pow((a[k] - b[k]) / ell[k], 2);
  const double r = std::sqrt(5.0 * r2);
  return sf2 * (1.0 + r + r * r / 3.0) * std::exp(-r);
}

struct GpOracle {
  std::vector<double> mean, variance;
};

// Posterior of a constant-mean GP (mean profiled by GLS) on standardized
// targets, computed with an explicit inverse. Returns original units.
inline GpOracle gp_oracle(const std::vector<std::vector<double>>& X, const std::vector<double>& y, const std::vector<double>& noise,
                          const std::vector<std::vector<double>>& probes, const GpHyperparameters& h, double jitter) {
  const std::size_t n = X.size();
  double shift = 0.0;
  for (double v : y) shift += v;
  shift /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : y) ss += (v - shift) * (v - shift);
  const double var = ss / std::max(1.0, static_cast<double>(n) - 1.0);
  const double scale = var > 1e-24 ? std::sqrt(var) : 1.0;
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (y[i] - shift) / scale;
  std::vector<std::vector<double>> K(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      K[i][j] = matern52_oracle(X[i], X[j], h.lengthscales, h.signal_variance) + (i == j ? noise[i] / (scale * scale) + jitter : 0.0);
  const auto Kinv = gauss_jordan_inverse(K);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      num += Kinv[i][j] * z[j];
      den += Kinv[i][j];
    }
  const double mu = num / den;
  GpOracle out;
  for (const auto& p : probes) {
    std::vector<double> k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = matern52_oracle(p, X[i], h.lengthscales, h.signal_variance);
    double m = mu, q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        m += k[i] * Kinv[i][j] * (z[j] - mu);
        q += k[i] * Kinv[i][j] * k[j];
      }
    out.mean.push_back(shift + scale * m);
    out.variance.push_back((h.signal_variance - q) * scale * scale);
  }
  return out;
}

}  // namespace testing_support
