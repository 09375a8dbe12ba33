#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <tuple>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mopol/acquisition.hpp"
#include "mopol/common.hpp"
#include "mopol/data.hpp"
#include "mopol/gp.hpp"
#include "mopol/pareto.hpp"
#include "mopol/policy_tree.hpp"
#include "mopol/sobol.hpp"
#include "mopol/tree_fit.hpp"

namespace mopol {

enum class SeMode {
  conventional,  // sample standard deviation of the bootstrap values
  alg1_literal,  // sqrt(Var[v] / (B - 1)) with Var the 1/B variance
};

inline std::string to_string(SeMode m) { return m == SeMode::conventional ? "conventional" : "alg1-literal"; }

inline SeMode parse_se_mode(const std::string& s) {
  if (s == "conventional") return SeMode::conventional;
  if (s == "alg1-literal" || s == "alg1_literal") return SeMode::alg1_literal;
  fail_validation("se mode '", s, "' is not conventional|alg1-literal");
}

struct Budget {
  std::optional<std::size_t> iterations;
  std::optional<double> seconds;

  void validate() const {
    if (iterations.has_value() == seconds.has_value()) fail_validation("set exactly one of the iteration and wall-seconds budgets");
    if (iterations && *iterations == 0) fail_validation("iteration budget must be positive");
    if (seconds && !(*seconds > 0.0)) fail_validation("wall-seconds budget must be positive");
  }
};

struct MopolConfig {
  TreeFitConfig tree;
  std::size_t replicates = 100;
  Budget budget{.iterations = 100, .seconds = std::nullopt};
  AcquisitionConfig acquisition;
  SeMode se_mode = SeMode::conventional;
  std::uint64_t seed = 0;
  // Objectives traded off; empty means one per score outcome.
  std::vector<ObjectiveMetric> metrics;
  SearchSpace::Bounds weight_bounds;
  GpBounds gp;

  void validate(std::size_t p) const {
    tree.validate(p);
    if (replicates < 2) fail_validation("bootstrap replicates must be >= 2, got ", replicates);
    budget.validate();
    acquisition.validate();
  }

  std::vector<ObjectiveMetric> resolved_metrics(std::size_t outcomes) const {
    return metrics.empty() ? outcome_metrics(outcomes) : metrics;
  }
};

namespace detail {

inline std::vector<std::vector<double>> values_of(const std::vector<EvaluatedPoint>& pts) {
  std::vector<std::vector<double>> v;
  for (const auto& p : pts) v.push_back(p.values);
  return v;
}

inline void check_sample(const Matrix& X, const ScoreMatrix& scores) {
  validate(scores);
  if (X.rows() != scores.units()) fail_validation("covariates have ", X.rows(), " rows, scores ", scores.units());
  if (X.cols() == 0) fail_validation("covariates have no columns");
}

}  // namespace detail

struct BootstrapResult {
  std::vector<double> ses;                   // per objective
  std::vector<std::vector<double>> values;   // [replicate][objective]
};

// Resamples rows of (X, Gamma) jointly, refits at lambda and values each
// refit on its own resample. Replicate b draws from a stream derived from
// (seed, b), and results are reduced in replicate order.
inline BootstrapResult bootstrap(const Matrix& X, const ScoreMatrix& scores, const WeightVector& lambda, const TreeFitConfig& tree,
                                 std::size_t replicates, SeMode mode, std::uint64_t seed,
                                 const std::vector<ObjectiveMetric>& metrics) {
  if (replicates < 2) fail_validation("bootstrap needs at least 2 replicates");
  const std::size_t n = X.rows(), p = X.cols(), d = scores.treatments(), k = scores.outcomes();
  BootstrapResult res;
  res.values.assign(replicates, {});
  parallel_for(replicates, [&](std::size_t b) {
    Rng rng(derive_seed(seed, 0xb007ULL, b));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    Matrix Xb(n, p);
    ScoreMatrix Sb{Tensor3(n, d, k)};
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = pick(rng);
      for (std::size_t j = 0; j < p; ++j) Xb(i, j) = X(r, j);
      for (std::size_t w = 0; w < d; ++w)
        for (std::size_t y = 0; y < k; ++y) Sb(i, w, y) = scores(r, w, y);
    }
    const PolicyTree t = fit_tree(Xb, Sb, lambda, tree, metrics);
    res.values[b] = metric_values(t, Xb, Sb, metrics);
  });
  const std::size_t K = metrics.size();
  res.ses.assign(K, 0.0);
  const double B = static_cast<double>(replicates);
  for (std::size_t m = 0; m < K; ++m) {
    double mean = 0.0;
    for (const auto& v : res.values) mean += v[m];
    mean /= B;
    double ss = 0.0;
    for (const auto& v : res.values) ss += (v[m] - mean) * (v[m] - mean);
    res.ses[m] = mode == SeMode::conventional ? std::sqrt(ss / (B - 1.0)) : std::sqrt((ss / B) / (B - 1.0));
  }
  return res;
}

inline std::vector<double> bootstrap_se(const Matrix& X, const ScoreMatrix& scores, const WeightVector& lambda, const TreeFitConfig& tree,
                                        std::size_t replicates, SeMode mode, std::uint64_t seed) {
  return bootstrap(X, scores, lambda, tree, replicates, mode, seed, outcome_metrics(scores.outcomes())).ses;
}

struct TraceRecord {
  std::size_t iteration = 0;
  std::string source;  // "sobol" or "acquisition"
  WeightVector lambda;
  std::vector<double> values;
  std::vector<double> ses;
  double fit_seconds = 0.0;
  double bootstrap_seconds = 0.0;
  double acquisition_seconds = 0.0;
  double acquisition_value = 0.0;
  double hypervolume = 0.0;

  double total_seconds() const { return fit_seconds + bootstrap_seconds + acquisition_seconds; }
};

struct RunTrace {
  std::vector<TraceRecord> records;
};

struct MopolResult {
  ParetoSet pareto;
  RunTrace trace;
  std::vector<EvaluatedPoint> evaluations;  // every evaluated point, in order
  std::vector<std::string> metric_names;
  std::vector<double> reference;            // over all evaluations
  double hypervolume = 0.0;
  std::size_t acquisition_calls = 0;
  std::size_t init_points = 0;
  bool partial = false;
};

// Fits the tree at lambda on the full sample, values it there and attaches
// bootstrap standard errors.
inline EvaluatedPoint evaluate_point(const Matrix& X, const ScoreMatrix& scores, const WeightVector& lambda, const MopolConfig& cfg,
                                     const std::vector<ObjectiveMetric>& metrics, std::size_t iteration, double* bootstrap_seconds = nullptr) {
  EvaluatedPoint pt;
  pt.lambda = lambda;
  pt.kind = to_string(cfg.tree.kind);
  pt.iteration = iteration;
  Stopwatch sw;
  PolicyTree tree = fit_tree(X, scores, lambda, cfg.tree, metrics);
  pt.fit_seconds = sw.seconds();
  pt.values = metric_values(tree, X, scores, metrics);
  pt.tree = std::move(tree);
  sw.reset();
  pt.ses = bootstrap(X, scores, lambda, cfg.tree, cfg.replicates, cfg.se_mode, derive_seed(cfg.seed, 0xe7a1ULL, iteration), metrics).ses;
  if (bootstrap_seconds) *bootstrap_seconds = sw.seconds();
  return pt;
}

// Observer invoked after each committed evaluation (e.g. for trace logging).
using TraceObserver = std::function<void(const TraceRecord&)>;

// Multi-objective search over outcome weights: Sobol initialization, then
// GP-surrogate / NEHVI proposals until the budget is spent.
inline MopolResult run_mopol(const ScoreMatrix& scores, const Matrix& X, const MopolConfig& cfg, const TraceObserver& observer = {}) {
  detail::check_sample(X, scores);
  cfg.validate(X.cols());
  const auto metrics = cfg.resolved_metrics(scores.outcomes());
  const std::size_t K = metrics.size();
  const SearchSpace space(K, cfg.weight_bounds);
  const auto init = sobol_init(space, derive_seed(cfg.seed, 0x1417ULL));

  MopolResult res;
  for (const auto& m : metrics) res.metric_names.push_back(m.name);
  res.init_points = init.size();
  Stopwatch clock;
  std::size_t next_init = 0;
  auto has_budget = [&] {
    if (cfg.budget.iterations) return res.evaluations.size() < *cfg.budget.iterations;
    return clock.seconds() < *cfg.budget.seconds;
  };

  while (has_budget()) {
    std::vector<WeightVector> batch;
    std::vector<double> acq_value;
    double acq_seconds = 0.0;
    std::string source;
    if (next_init < init.size()) {
      batch.push_back(init[next_init++]);
      acq_value.push_back(0.0);
      source = "sobol";
    } else {
      Stopwatch sw;
      std::vector<Observation> obs;
      for (const auto& e : res.evaluations) obs.push_back({e.lambda, e.values, e.ses});
      const GPModel model = gp_fit(obs, cfg.gp);
      const auto ref = reference_point(detail::values_of(res.evaluations));
      AcquisitionConfig acq = cfg.acquisition;
      acq.seed = derive_seed(cfg.seed, 0xacc0ULL, res.evaluations.size());
      const auto props = propose_candidates(model, ref, space, acq);
      for (const auto& pr : props) {
        batch.push_back(pr.lambda);
        acq_value.push_back(pr.score.value);
      }
      acq_seconds = sw.seconds() / static_cast<double>(props.size());
      ++res.acquisition_calls;
      source = "acquisition";
    }
    if (cfg.budget.iterations) batch.resize(std::min(batch.size(), *cfg.budget.iterations - res.evaluations.size()));

    const std::size_t base = res.evaluations.size();
    std::vector<EvaluatedPoint> done(batch.size());
    std::vector<double> boot_seconds(batch.size(), 0.0);
    parallel_for(batch.size(), [&](std::size_t i) {
      done[i] = evaluate_point(X, scores, batch[i], cfg, metrics, base + i, &boot_seconds[i]);
    });
    for (std::size_t i = 0; i < done.size(); ++i) {
      res.pareto.update(done[i]);
      res.evaluations.push_back(done[i]);
      TraceRecord rec;
      rec.iteration = done[i].iteration;
      rec.source = source;
      rec.lambda = done[i].lambda;
      rec.values = done[i].values;
      rec.ses = done[i].ses;
      rec.fit_seconds = done[i].fit_seconds;
      rec.bootstrap_seconds = boot_seconds[i];
      rec.acquisition_seconds = acq_seconds;
      rec.acquisition_value = acq_value[i];
      const auto ref = reference_point(detail::values_of(res.evaluations));
      rec.hypervolume = hypervolume(res.pareto.value_vectors(), ref);
      res.trace.records.push_back(rec);
      if (observer) observer(rec);
    }
  }
  res.partial = res.evaluations.size() < init.size();
  res.reference = reference_point(detail::values_of(res.evaluations));
  res.hypervolume = res.evaluations.empty() ? 0.0 : hypervolume(res.pareto.value_vectors(), res.reference);
  return res;
}

enum class SplitMode { shuffled, contiguous };

struct FinalReport {
  WeightVector lambda;
  TreeFitConfig tree_config;
  PolicyTree tree;
  std::vector<std::string> metric_names;
  std::vector<double> train_values;
  std::vector<double> test_values;
  double train_weighted = 0.0;
  double test_weighted = 0.0;
  double fit_seconds = 0.0;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  std::vector<std::string> warnings;
};

// Train/test row indices: a seeded shuffle, or the first round(n * fraction)
// rows as train.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(std::size_t n, double train_fraction, std::uint64_t seed,
                                                                                SplitMode mode) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail_validation("train fraction must be in (0,1), got ", train_fraction);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (mode == SplitMode::shuffled) {
    Rng rng(derive_seed(seed, 0x5917ULL));
    std::shuffle(idx.begin(), idx.end(), rng);
  }
  const std::size_t n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  if (n_train == 0 || n_train >= n) fail_validation("split of ", n, " rows at ", train_fraction, " leaves an empty partition");
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  if (mode == SplitMode::shuffled) {
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
  }
  return {train, test};
}

inline Matrix take_rows(const Matrix& X, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = X(rows[i], j);
  return out;
}

inline ScoreMatrix take_rows(const ScoreMatrix& s, const std::vector<std::size_t>& rows) {
  ScoreMatrix out{Tensor3(rows.size(), s.treatments(), s.outcomes())};
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t w = 0; w < s.treatments(); ++w)
      for (std::size_t y = 0; y < s.outcomes(); ++y) out(i, w, y) = s(rows[i], w, y);
  return out;
}

struct FinalOptions {
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
  SplitMode split = SplitMode::shuffled;
  std::vector<ObjectiveMetric> metrics;  // empty = outcomes
  std::span<const int> treatments;       // optional, for the missing-arm check
};

// Fits the chosen-weight tree on a train split and reports per-objective
// values on both partitions.
inline FinalReport fit_final(const ScoreMatrix& scores, const Matrix& X, const WeightVector& lambda, const TreeFitConfig& tree_cfg,
                             const FinalOptions& opt = {}) {
  detail::check_sample(X, scores);
  const auto metrics = opt.metrics.empty() ? outcome_metrics(scores.outcomes()) : opt.metrics;
  if (lambda.size() != metrics.size()) fail_validation("weight vector has ", lambda.size(), " entries for ", metrics.size(), " objectives");
  FinalReport rep;
  rep.lambda = lambda;
  rep.tree_config = tree_cfg;
  for (const auto& m : metrics) rep.metric_names.push_back(m.name);
  std::tie(rep.train_rows, rep.test_rows) = split_rows(X.rows(), opt.train_fraction, opt.seed, opt.split);
  if (!opt.treatments.empty()) {
    if (opt.treatments.size() != X.rows()) fail_validation("treatment vector length disagrees with the sample");
    std::vector<char> seen(scores.treatments(), 0);
    for (std::size_t r : rep.train_rows) {
      const int w = opt.treatments[r];
      if (w >= 0 && static_cast<std::size_t>(w) < seen.size()) seen[static_cast<std::size_t>(w)] = 1;
    }
    for (std::size_t w = 0; w < seen.size(); ++w)
      if (!seen[w]) {
        rep.warnings.push_back("train partition has no unit that received treatment " + std::to_string(w));
        warn(rep.warnings.back());
      }
  }
  const Matrix Xtr = take_rows(X, rep.train_rows), Xte = take_rows(X, rep.test_rows);
  const ScoreMatrix Str = take_rows(scores, rep.train_rows), Ste = take_rows(scores, rep.test_rows);
  Stopwatch sw;
  rep.tree = fit_tree(Xtr, Str, lambda, tree_cfg, metrics);
  rep.fit_seconds = sw.seconds();
  rep.train_values = metric_values(rep.tree, Xtr, Str, metrics);
  rep.test_values = metric_values(rep.tree, Xte, Ste, metrics);
  rep.train_weighted = weighted_sum(lambda, rep.train_values);
  rep.test_weighted = weighted_sum(lambda, rep.test_values);
  return rep;
}

// Values of a given (e.g. handpicked) tree; no fitting.
inline std::vector<double> evaluate_rules(const PolicyTree& tree, const ScoreMatrix& scores, const Matrix& X,
                                          const std::vector<ObjectiveMetric>& metrics) {
  detail::check_sample(X, scores);
  return metric_values(tree, X, scores, metrics);
}

inline std::vector<double> evaluate_rules(const PolicyTree& tree, const ScoreMatrix& scores, const Matrix& X) {
  return evaluate_rules(tree, scores, X, outcome_metrics(scores.outcomes()));
}

}  // namespace mopol
