#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mopol/common.hpp"
#include "mopol/gp.hpp"
#include "mopol/pareto.hpp"
#include "mopol/sobol.hpp"
#include "mopol/weights.hpp"

namespace mopol {

struct AcquisitionConfig {
  std::size_t mc_samples = 128;
  std::size_t candidate_grid = 256;
  std::size_t refine_steps = 20;
  std::size_t q = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (mc_samples < 16) fail_validation("mc_samples must be >= 16, got ", mc_samples);
    if (q < 1) fail_validation("q must be >= 1");
    if (candidate_grid < 2) fail_validation("candidate_grid must be >= 2");
  }
};

struct AcquisitionScore {
  double value = 0.0;     // mean hypervolume improvement over draws
  double std_error = 0.0; // Monte-Carlo standard error of the mean
};

namespace detail {

// Cholesky of a PSD matrix with jitter escalating by decades from 1e-10 to
// 1e-4 (relative to the largest diagonal entry).
inline Eigen::MatrixXd psd_cholesky(const Eigen::MatrixXd& S) {
  const double scale = std::max(1e-300, S.diagonal().cwiseAbs().maxCoeff());
  for (double jitter = 1e-10; jitter <= 1e-4 * 1.0000001; jitter *= 10.0) {
    Eigen::MatrixXd A = S;
    A.diagonal().array() += jitter * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw std::runtime_error("posterior covariance at the baseline points is not positive semi-definite");
}

inline std::uint64_t hash_point(std::span<const double> x) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (double v : x) h = mix64(h ^ std::bit_cast<std::uint64_t>(v + 0.0));
  return h;
}

}  // namespace detail

// Monte-Carlo noisy expected hypervolume improvement. Draw s samples the
// latent objectives jointly at the baseline points (the model's training
// inputs plus any pending picks), forms that draw's frontier, then extends
// the same joint draw to the candidate and measures the hypervolume gain.
// Baseline draws are shared across candidates; each candidate's residual
// noise comes from a stream seeded by its coordinates, so scores do not
// depend on evaluation order.
class NehviScorer {
 public:
  NehviScorer(const GPModel& model, std::vector<double> ref, const AcquisitionConfig& cfg,
              const std::vector<std::vector<double>>& pending_coords = {})
      : model_(model), ref_(std::move(ref)), cfg_(cfg) {
    cfg.validate();
    if (ref_.size() != model.objectives()) fail_validation("reference point has ", ref_.size(), " entries for ", model.objectives(), " objectives");
    const Eigen::MatrixXd& train = model.inputs();
    const Eigen::Index m0 = train.rows(), D = train.cols();
    baseline_ = Eigen::MatrixXd(m0 + static_cast<Eigen::Index>(pending_coords.size()), D);
    baseline_.topRows(m0) = train;
    for (std::size_t i = 0; i < pending_coords.size(); ++i)
      for (Eigen::Index j = 0; j < D; ++j) baseline_(m0 + static_cast<Eigen::Index>(i), j) = pending_coords[i][static_cast<std::size_t>(j)];

    const std::size_t K = model.objectives(), S = cfg.mc_samples;
    const Eigen::Index m = baseline_.rows();
    Rng rng(derive_seed(cfg.seed, 0xbA5E11AEULL));
    std::normal_distribution<double> normal(0.0, 1.0);
    per_output_.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      auto& o = per_output_[k];
      const auto& gp = model.output(k);
      o.mean = gp.posterior_mean(baseline_);
      o.chol = detail::psd_cholesky(gp.posterior_covariance(baseline_));
      o.vb = gp.solve_lower(gp.kernel(train, baseline_));
      Eigen::MatrixXd Z(m, static_cast<Eigen::Index>(S));
      for (Eigen::Index s = 0; s < Z.cols(); ++s)
        for (Eigen::Index i = 0; i < m; ++i) Z(i, s) = normal(rng);
      o.z = Z;
      o.draws = (o.chol * Z).colwise() + o.mean;
    }
    frontiers_.resize(S);
    base_hv_.resize(S);
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<std::vector<double>> pts(static_cast<std::size_t>(m), std::vector<double>(K));
      for (Eigen::Index i = 0; i < m; ++i)
        for (std::size_t k = 0; k < K; ++k) pts[static_cast<std::size_t>(i)][k] = per_output_[k].draws(i, static_cast<Eigen::Index>(s));
      frontiers_[s] = nondominated(std::move(pts));
      base_hv_[s] = hypervolume(frontiers_[s], ref_);
    }
  }

  AcquisitionScore score(const WeightVector& candidate) const { return score_coords(candidate.coordinates()); }

  AcquisitionScore score_coords(const std::vector<double>& coords) const {
    const std::size_t K = model_.objectives(), S = cfg_.mc_samples;
    const Eigen::Index D = baseline_.cols();
    Eigen::MatrixXd c(1, D);
    for (Eigen::Index j = 0; j < D; ++j) c(0, j) = coords[static_cast<std::size_t>(j)];
    Rng rng(derive_seed(cfg_.seed, detail::hash_point(coords)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::VectorXd> fc(K);
    for (std::size_t k = 0; k < K; ++k) {
      const auto& o = per_output_[k];
      const auto& gp = model_.output(k);
      const double mu = gp.posterior_mean(c)(0);
      const Eigen::MatrixXd vc = gp.solve_lower(gp.kernel(gp.inputs(), c));
      const double scale2 = gp.y_scale() * gp.y_scale();
      const Eigen::VectorXd cross = (gp.kernel(baseline_, c) - o.vb.transpose() * vc) * scale2;
      const double var = (gp.kernel(c, c)(0, 0) - vc.squaredNorm()) * scale2;
      const Eigen::VectorXd w = o.chol.triangularView<Eigen::Lower>().solve(cross);
      const double resid = std::sqrt(std::max(0.0, var - w.squaredNorm()));
      fc[k] = (o.z.transpose() * w).array() + mu;
      for (std::size_t s = 0; s < S; ++s) fc[k](static_cast<Eigen::Index>(s)) += resid * normal(rng);
    }
    double sum = 0.0, sum2 = 0.0;
    std::vector<std::vector<double>> pts;
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<double> p(K);
      for (std::size_t k = 0; k < K; ++k) p[k] = fc[k](static_cast<Eigen::Index>(s));
      const double gain = improvement(frontiers_[s], base_hv_[s], p);
      sum += gain;
      sum2 += gain * gain;
    }
    const double n = static_cast<double>(S);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
  }

  const std::vector<double>& reference() const { return ref_; }

 private:
  double improvement(const std::vector<std::vector<double>>& front, double base, const std::vector<double>& p) const {
    for (std::size_t k = 0; k < p.size(); ++k)
      if (!(p[k] > ref_[k])) return 0.0;
    for (const auto& f : front)
      if (dominates(f, p) || f == p) return 0.0;
    auto pts = front;
    pts.push_back(p);
    return std::max(0.0, hypervolume(pts, ref_) - base);
  }

  struct Output {
    Eigen::VectorXd mean;
    Eigen::MatrixXd chol, vb, z, draws;
  };

  const GPModel& model_;
  std::vector<double> ref_;
  AcquisitionConfig cfg_;
  Eigen::MatrixXd baseline_;
  std::vector<Output> per_output_;
  std::vector<std::vector<std::vector<double>>> frontiers_;
  std::vector<double> base_hv_;
};

inline std::vector<AcquisitionScore> nehvi_score(const GPModel& model, const std::vector<double>& ref,
                                                 const std::vector<WeightVector>& candidates, const AcquisitionConfig& cfg) {
  const NehviScorer scorer(model, ref, cfg);
  std::vector<AcquisitionScore> out(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) { out[i] = scorer.score(candidates[i]); });
  return out;
}

struct Proposal {
  WeightVector lambda;
  AcquisitionScore score;
};

namespace detail {

inline std::vector<std::vector<double>> unit_grid(std::size_t dims, std::size_t count, std::uint64_t seed) {
  std::vector<std::vector<double>> grid;
  if (dims == 1) {
    for (std::size_t i = 0; i < count; ++i) grid.push_back({static_cast<double>(i) / static_cast<double>(count - 1)});
    return grid;
  }
  if (dims <= 4)
    for (std::size_t mask = 0; mask < (std::size_t{1} << dims); ++mask) {
      std::vector<double> u(dims);
      for (std::size_t j = 0; j < dims; ++j) u[j] = (mask >> j) & 1u ? 1.0 : 0.0;
      grid.push_back(u);
    }
  SobolSequence seq(dims, true, seed);
  while (grid.size() < count) grid.push_back(seq.next());
  return grid;
}

}  // namespace detail

// Proposes q distinct weight vectors. Each pick scans a fixed grid of the
// search space, refines the best grid point by pattern search, and is then
// added to the baseline as a pending point so later picks are scored against
// fantasy draws that include it.
inline std::vector<Proposal> propose_candidates(const GPModel& model, const std::vector<double>& ref, const SearchSpace& space,
                                                const AcquisitionConfig& cfg) {
  cfg.validate();
  if (space.objectives() != model.objectives()) fail_validation("search space and model disagree on the number of objectives");
  const std::size_t D = space.dims();
  const auto grid = detail::unit_grid(D, cfg.candidate_grid, derive_seed(cfg.seed, 0x6121dULL));
  std::vector<Proposal> picks;
  std::vector<std::vector<double>> pending;
  auto distinct = [&](const WeightVector& w) {
    for (const auto& p : picks) {
      double diff = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) diff = std::max(diff, std::abs(p.lambda[j] - w[j]));
      if (diff <= 1e-9) return false;
    }
    return true;
  };

  for (std::size_t pick = 0; pick < cfg.q; ++pick) {
    AcquisitionConfig pick_cfg = cfg;
    pick_cfg.seed = derive_seed(cfg.seed, pick);
    const NehviScorer scorer(model, ref, pick_cfg, pending);
    std::vector<AcquisitionScore> scores(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { scores[i] = scorer.score(space.map(grid[i])); });

    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a].value > scores[b].value; });
    std::size_t start = order.front();
    for (std::size_t idx : order)
      if (distinct(space.map(grid[idx]))) {
        start = idx;
        break;
      }

    std::vector<double> u = grid[start];
    AcquisitionScore best = scores[start];
    double step = D == 1 ? 1.0 / static_cast<double>(cfg.candidate_grid - 1) : 0.1;
    for (std::size_t it = 0; it < cfg.refine_steps; ++it) {
      bool moved = false;
      for (std::size_t j = 0; j < D && !moved; ++j)
        for (double dir : {-1.0, 1.0}) {
          std::vector<double> trial = u;
          trial[j] = std::clamp(trial[j] + dir * step, 0.0, 1.0);
          if (trial == u) continue;
          const auto w = space.map(trial);
          if (!distinct(w)) continue;
          const auto s = scorer.score(w);
          if (s.value > best.value) {
            best = s;
            u = trial;
            moved = true;
            break;
          }
        }
      if (!moved) step *= 0.5;
    }
    WeightVector chosen = space.map(u);
    if (!distinct(chosen)) {
      // Every grid point coincides with an earlier pick; perturb off it.
      std::vector<double> trial = u;
      trial[0] = trial[0] > 0.5 ? trial[0] - 1e-3 : trial[0] + 1e-3;
      chosen = space.map(trial);
      best = scorer.score(chosen);
    }
    picks.push_back({chosen, best});
    pending.push_back(chosen.coordinates());
  }
  return picks;
}

}  // namespace mopol
