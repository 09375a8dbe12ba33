#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mopol/common.hpp"
#include "mopol/data.hpp"
#include "mopol/policy_tree.hpp"
#include "mopol/weights.hpp"

namespace mopol {

enum class FitterKind { greedy, hybrid, optimal };

inline std::string to_string(FitterKind k) {
  switch (k) {
    case FitterKind::greedy: return "greedy";
    case FitterKind::hybrid: return "hybrid";
    case FitterKind::optimal: return "optimal";
  }
  return "?";
}

inline FitterKind parse_fitter(const std::string& s) {
  if (s == "greedy") return FitterKind::greedy;
  if (s == "hybrid") return FitterKind::hybrid;
  if (s == "optimal") return FitterKind::optimal;
  fail_validation("fitter '", s, "' is not greedy|hybrid|optimal");
}

// Where a split between two adjacent distinct sorted values a < b is placed.
// Both rules induce the same partition of the fitting sample.
enum class SplitRule { midpoint, lower_value };

struct TreeFitConfig {
  FitterKind kind = FitterKind::greedy;
  std::size_t depth = 2;
  std::size_t lookahead = 2;  // hybrid only
  SplitRule split_rule = SplitRule::midpoint;
  double value_epsilon = 1e-12;
  std::vector<std::size_t> feature_mask;  // empty = every feature
  // Upper bound on p^k n^k (log2 n + d) for the exact search.
  double feasibility_limit = 1e11;

  void validate(std::size_t p) const {
    if (kind == FitterKind::hybrid && lookahead < 2) fail_validation("hybrid lookahead must be >= 2, got ", lookahead);
    if (!(value_epsilon >= 0.0)) fail_validation("value_epsilon must be >= 0");
    for (std::size_t f : feature_mask)
      if (f >= p) fail_validation("feature mask index ", f, " out of range for p=", p);
    if (!feature_mask.empty()) {
      auto m = feature_mask;
      std::sort(m.begin(), m.end());
      if (std::adjacent_find(m.begin(), m.end()) != m.end()) fail_validation("feature mask has duplicates");
    }
  }

  std::vector<std::size_t> features(std::size_t p) const {
    if (!feature_mask.empty()) {
      auto m = feature_mask;
      std::sort(m.begin(), m.end());
      return m;
    }
    std::vector<std::size_t> all(p);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
};

// n x d rewards: R_{i,w} = sum over outcome metrics m of lambda_m Gamma_{i,w,y_m}.
inline Matrix weighted_rewards(const ScoreMatrix& scores, const WeightVector& lambda, const std::vector<ObjectiveMetric>& metrics) {
  if (lambda.size() != metrics.size())
    fail_validation("weight vector has ", lambda.size(), " entries for ", metrics.size(), " metrics");
  Matrix R(scores.units(), scores.treatments());
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    if (!metrics[m].is_outcome() || lambda[m] == 0.0) continue;
    const auto y = static_cast<std::size_t>(metrics[m].outcome);
    if (y >= scores.outcomes()) fail_validation("metric '", metrics[m].name, "' refers to missing outcome ", y);
    for (std::size_t i = 0; i < scores.units(); ++i)
      for (std::size_t w = 0; w < scores.treatments(); ++w) R(i, w) += lambda[m] * scores(i, w, y);
  }
  return R;
}

namespace detail {

// Rows of one tree node, sorted by each active feature (ties by row index).
struct NodeRows {
  std::vector<std::vector<int>> by_feature;
  std::size_t size() const { return by_feature.empty() ? 0 : by_feature[0].size(); }
};

struct SplitChoice {
  bool found = false;
  double value = 0.0;  // total reward of the best subtree with this split
  std::size_t feature_slot = 0;
  std::size_t position = 0;  // rows [0, position] of the sorted list go left
  double threshold = 0.0;
};

class TreeSearch {
 public:
  TreeSearch(const Matrix& X, const Matrix& R, const TreeFitConfig& cfg)
      : X_(X), R_(R), cfg_(cfg), n_(X.rows()), d_(R.cols()), features_(cfg.features(X.cols())) {
    if (R.rows() != n_) fail_validation("rewards have ", R.rows(), " rows, covariates ", n_);
    scratch_.resize(cfg.depth + 1);
    for (auto& s : scratch_) {
      s.mark.assign(n_, 0);
      s.left.by_feature.resize(features_.size());
      s.right.by_feature.resize(features_.size());
    }
  }

  NodeRows root() const {
    NodeRows node;
    node.by_feature.resize(features_.size());
    for (std::size_t s = 0; s < features_.size(); ++s) {
      auto& rows = node.by_feature[s];
      rows.resize(n_);
      std::iota(rows.begin(), rows.end(), 0);
      const std::size_t f = features_[s];
      std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) { return X_(a, f) < X_(b, f); });
    }
    return node;
  }

  // Best constant assignment: (total reward, treatment), lowest index on ties.
  std::pair<double, int> best_leaf(const NodeRows& node) const {
    std::vector<double> sums(d_, 0.0);
    if (node.size() > 0)
      for (int r : node.by_feature[0])
        for (std::size_t w = 0; w < d_; ++w) sums[w] += R_(r, w);
    int best = 0;
    for (std::size_t w = 1; w < d_; ++w)
      if (sums[w] > sums[best]) best = static_cast<int>(w);
    return {sums[best], best};
  }

  bool improves(double candidate, double base) const {
    return candidate > base + cfg_.value_epsilon * std::max(1.0, std::abs(base));
  }

  // Best single split where each child takes its best constant treatment.
  SplitChoice best_stump(const NodeRows& node) const {
    SplitChoice best;
    const std::size_t m = node.size();
    if (m < 2) return best;
    std::vector<double> total(d_, 0.0), prefix(d_);
    for (int r : node.by_feature[0])
      for (std::size_t w = 0; w < d_; ++w) total[w] += R_(r, w);
    for (std::size_t s = 0; s < features_.size(); ++s) {
      const auto& rows = node.by_feature[s];
      const std::size_t f = features_[s];
      std::fill(prefix.begin(), prefix.end(), 0.0);
      for (std::size_t pos = 0; pos + 1 < m; ++pos) {
        const int r = rows[pos];
        for (std::size_t w = 0; w < d_; ++w) prefix[w] += R_(r, w);
        const double a = X_(r, f), b = X_(rows[pos + 1], f);
        if (!(a < b)) continue;
        double lv = prefix[0], rv = total[0] - prefix[0];
        for (std::size_t w = 1; w < d_; ++w) {
          lv = std::max(lv, prefix[w]);
          rv = std::max(rv, total[w] - prefix[w]);
        }
        const double v = lv + rv;
        if (!best.found || v > best.value) {
          best.found = true;
          best.value = v;
          best.feature_slot = s;
          best.position = pos;
          best.threshold = threshold(a, b);
        }
      }
    }
    return best;
  }

  double threshold(double a, double b) const {
    if (cfg_.split_rule == SplitRule::lower_value) return a;
    const double t = a + (b - a) * 0.5;
    return (t >= a && t < b) ? t : a;
  }

  // Splits node rows by the choice into the two outputs.
  void partition(const NodeRows& node, const SplitChoice& c, std::vector<char>& mark, NodeRows& left, NodeRows& right) const {
    const auto& rows = node.by_feature[c.feature_slot];
    for (int r : rows) mark[static_cast<std::size_t>(r)] = 0;
    for (std::size_t pos = 0; pos <= c.position; ++pos) mark[static_cast<std::size_t>(rows[pos])] = 1;
    left.by_feature.resize(features_.size());
    right.by_feature.resize(features_.size());
    for (std::size_t s = 0; s < features_.size(); ++s) {
      auto& l = left.by_feature[s];
      auto& rr = right.by_feature[s];
      l.clear();
      rr.clear();
      for (int r : node.by_feature[s]) (mark[static_cast<std::size_t>(r)] ? l : rr).push_back(r);
    }
  }

  // Exact maximum total reward over trees of depth <= depth on this node.
  double optimal_value(const NodeRows& node, std::size_t depth) {
    const double leaf = best_leaf(node).first;
    if (depth == 0 || node.size() < 2) return leaf;
    if (depth == 1) {
      const auto c = best_stump(node);
      return c.found && improves(c.value, leaf) ? c.value : leaf;
    }
    const auto c = best_deep_split(node, depth);
    return c.found && improves(c.value, leaf) ? c.value : leaf;
  }

  // Best root split when both children are solved exactly to depth - 1.
  SplitChoice best_deep_split(const NodeRows& node, std::size_t depth) {
    SplitChoice best;
    const std::size_t m = node.size();
    if (m < 2) return best;
    auto& s = scratch_.at(depth);
    for (std::size_t slot = 0; slot < features_.size(); ++slot) {
      const auto& rows = node.by_feature[slot];
      const std::size_t f = features_[slot];
      for (int r : rows) s.mark[static_cast<std::size_t>(r)] = 0;
      for (std::size_t pos = 0; pos + 1 < m; ++pos) {
        s.mark[static_cast<std::size_t>(rows[pos])] = 1;
        const double a = X_(rows[pos], f), b = X_(rows[pos + 1], f);
        if (!(a < b)) continue;
        for (std::size_t g = 0; g < features_.size(); ++g) {
          auto& l = s.left.by_feature[g];
          auto& rr = s.right.by_feature[g];
          l.clear();
          rr.clear();
          for (int r : node.by_feature[g]) (s.mark[static_cast<std::size_t>(r)] ? l : rr).push_back(r);
        }
        const double v = optimal_value(s.left, depth - 1) + optimal_value(s.right, depth - 1);
        if (!best.found || v > best.value) {
          best.found = true;
          best.value = v;
          best.feature_slot = slot;
          best.position = pos;
          best.threshold = threshold(a, b);
        }
      }
    }
    return best;
  }

  PolicyTree optimal_tree(const NodeRows& node, std::size_t depth) {
    const auto [leaf, leaf_w] = best_leaf(node);
    if (depth == 0 || node.size() < 2) return PolicyTree::leaf(leaf_w);
    const auto c = depth == 1 ? best_stump(node) : best_deep_split(node, depth);
    if (!c.found || !improves(c.value, leaf)) return PolicyTree::leaf(leaf_w);
    NodeRows left, right;
    std::vector<char> mark(n_, 0);
    partition(node, c, mark, left, right);
    return PolicyTree::split(static_cast<int>(features_[c.feature_slot]), c.threshold, optimal_tree(left, depth - 1),
                             optimal_tree(right, depth - 1));
  }

  PolicyTree greedy_tree(const NodeRows& node, std::size_t depth) const {
    const auto [leaf, leaf_w] = best_leaf(node);
    if (depth == 0 || node.size() < 2) return PolicyTree::leaf(leaf_w);
    const auto c = best_stump(node);
    if (!c.found || !improves(c.value, leaf)) return PolicyTree::leaf(leaf_w);
    NodeRows left, right;
    std::vector<char> mark(n_, 0);
    partition(node, c, mark, left, right);
    return PolicyTree::split(static_cast<int>(features_[c.feature_slot]), c.threshold, greedy_tree(left, depth - 1),
                             greedy_tree(right, depth - 1));
  }

  // Commits the root split of the best depth-`lookahead` subtree, then
  // recurses. Within the last `lookahead` levels this is the exact search.
  PolicyTree hybrid_tree(const NodeRows& node, std::size_t depth) {
    const std::size_t horizon = cfg_.lookahead;
    if (depth <= horizon) return optimal_tree(node, depth);
    const auto [leaf, leaf_w] = best_leaf(node);
    if (node.size() < 2) return PolicyTree::leaf(leaf_w);
    const auto c = best_deep_split(node, horizon);
    if (!c.found || !improves(c.value, leaf)) return PolicyTree::leaf(leaf_w);
    NodeRows left, right;
    std::vector<char> mark(n_, 0);
    partition(node, c, mark, left, right);
    return PolicyTree::split(static_cast<int>(features_[c.feature_slot]), c.threshold, hybrid_tree(left, depth - 1),
                             hybrid_tree(right, depth - 1));
  }

  void ensure_scratch(std::size_t depth) {
    if (scratch_.size() > depth) return;
    const std::size_t old = scratch_.size();
    scratch_.resize(depth + 1);
    for (std::size_t i = old; i < scratch_.size(); ++i) {
      scratch_[i].mark.assign(n_, 0);
      scratch_[i].left.by_feature.resize(features_.size());
      scratch_[i].right.by_feature.resize(features_.size());
    }
  }

 private:
  struct Scratch {
    std::vector<char> mark;
    NodeRows left, right;
  };

  const Matrix& X_;
  const Matrix& R_;
  const TreeFitConfig& cfg_;
  std::size_t n_, d_;
  std::vector<std::size_t> features_;
  std::vector<Scratch> scratch_;
};

inline void check_inputs(const Matrix& X, const Matrix& R, const TreeFitConfig& cfg) {
  if (X.rows() == 0) fail_validation("cannot fit a tree on zero rows");
  if (R.cols() < 1) fail_validation("rewards need at least one treatment column");
  cfg.validate(X.cols());
}

}  // namespace detail

// Estimated operation count of the exact search, p^k n^k (log2 n + d).
inline double optimal_cost_estimate(std::size_t n, std::size_t p, std::size_t d, std::size_t depth) {
  const double pn = static_cast<double>(p) * static_cast<double>(n);
  return std::pow(pn, static_cast<double>(depth)) * (std::log2(std::max<double>(2.0, static_cast<double>(n))) + static_cast<double>(d));
}

inline PolicyTree fit_rewards(const Matrix& X, const Matrix& R, const TreeFitConfig& cfg) {
  detail::check_inputs(X, R, cfg);
  const std::size_t p_active = cfg.features(X.cols()).size();
  if (cfg.kind == FitterKind::optimal || cfg.kind == FitterKind::hybrid) {
    const std::size_t horizon = cfg.kind == FitterKind::optimal ? cfg.depth : std::min(cfg.depth, cfg.lookahead);
    const double cost = optimal_cost_estimate(X.rows(), p_active, R.cols(), horizon);
    if (cost > cfg.feasibility_limit)
      fail_validation("exact tree search of depth ", horizon, " on n=", X.rows(), ", p=", p_active, " is estimated at ", cost,
                      " operations (limit ", cfg.feasibility_limit, "); use the greedy or hybrid fitter or a smaller depth");
  }
  detail::TreeSearch search(X, R, cfg);
  search.ensure_scratch(std::max(cfg.depth, cfg.lookahead));
  const auto root = search.root();
  switch (cfg.kind) {
    case FitterKind::greedy: return search.greedy_tree(root, cfg.depth);
    case FitterKind::hybrid: return search.hybrid_tree(root, cfg.depth);
    case FitterKind::optimal: return search.optimal_tree(root, cfg.depth);
  }
  return PolicyTree::leaf(0);
}

inline PolicyTree fit_tree(const Matrix& X, const ScoreMatrix& scores, const WeightVector& lambda, const TreeFitConfig& cfg,
                           const std::vector<ObjectiveMetric>& metrics) {
  if (X.rows() != scores.units()) fail_validation("X has ", X.rows(), " rows, scores ", scores.units());
  return fit_rewards(X, weighted_rewards(scores, lambda, metrics), cfg);
}

inline PolicyTree fit_tree(const Matrix& X, const ScoreMatrix& scores, const WeightVector& lambda, const TreeFitConfig& cfg) {
  return fit_tree(X, scores, lambda, cfg, outcome_metrics(scores.outcomes()));
}

namespace detail {
inline void require_kind(const TreeFitConfig& cfg, FitterKind k) {
  if (cfg.kind != k) fail_validation("fit_", to_string(k), " called with a ", to_string(cfg.kind), " config");
}
}  // namespace detail

inline PolicyTree fit_greedy(const Matrix& X, const ScoreMatrix& scores, const WeightVector& lambda, const TreeFitConfig& cfg) {
  detail::require_kind(cfg, FitterKind::greedy);
  return fit_tree(X, scores, lambda, cfg);
}

inline PolicyTree fit_hybrid(const Matrix& X, const ScoreMatrix& scores, const WeightVector& lambda, const TreeFitConfig& cfg) {
  detail::require_kind(cfg, FitterKind::hybrid);
  return fit_tree(X, scores, lambda, cfg);
}

inline PolicyTree fit_optimal(const Matrix& X, const ScoreMatrix& scores, const WeightVector& lambda, const TreeFitConfig& cfg) {
  detail::require_kind(cfg, FitterKind::optimal);
  return fit_tree(X, scores, lambda, cfg);
}

}  // namespace mopol
