#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mopol/common.hpp"
#include "mopol/policy_tree.hpp"
#include "mopol/weights.hpp"

namespace mopol {

// a >= b everywhere and a > b somewhere (maximization).
inline bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail_validation("dominates: length mismatch");
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

struct EvaluatedPoint {
  WeightVector lambda;
  std::vector<double> values;  // per objective, maximization orientation
  std::vector<double> ses;
  std::string kind;  // fitter used
  double fit_seconds = 0.0;
  std::size_t iteration = 0;
  std::optional<PolicyTree> tree;
};

// Members are mutually non-dominated on their point estimates.
class ParetoSet {
 public:
  const std::vector<EvaluatedPoint>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }

  // Returns true when the point joined the set.
  bool update(const EvaluatedPoint& pt) {
    for (double v : pt.values)
      if (!std::isfinite(v)) fail_validation("cannot add a point with non-finite values to the Pareto set");
    for (const auto& m : members_)
      if (dominates(m.values, pt.values)) return false;
    std::erase_if(members_, [&](const EvaluatedPoint& m) { return dominates(pt.values, m.values); });
    members_.push_back(pt);
    return true;
  }

  std::vector<std::vector<double>> value_vectors() const {
    std::vector<std::vector<double>> v;
    v.reserve(members_.size());
    for (const auto& m : members_) v.push_back(m.values);
    return v;
  }

 private:
  std::vector<EvaluatedPoint> members_;
};

inline ParetoSet update_pareto(ParetoSet set, const EvaluatedPoint& pt) {
  set.update(pt);
  return set;
}

// Non-dominated subset by pairwise comparison; equal duplicates are kept once.
inline std::vector<std::vector<double>> nondominated(std::vector<std::vector<double>> pts) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j)
      dominated = j != i && dominates(pts[j], pts[i]);
    if (!dominated && std::find(out.begin(), out.end(), pts[i]) == out.end()) out.push_back(pts[i]);
  }
  return out;
}

namespace detail {

// Hypervolume of points already known to be >= ref, over the first `dims`
// coordinates. Two dimensions use a sorted sweep; more use slicing along the
// last coordinate.
inline double hv_recursive(std::vector<const double*> pts, const double* ref, std::size_t dims) {
  if (pts.empty()) return 0.0;
  if (dims == 1) {
    double best = ref[0];
    for (const double* p : pts) best = std::max(best, p[0]);
    return best - ref[0];
  }
  if (dims == 2) {
    std::sort(pts.begin(), pts.end(), [](const double* a, const double* b) {
      return a[0] != b[0] ? a[0] > b[0] : a[1] > b[1];
    });
    double area = 0.0, top = ref[1];
    for (const double* p : pts) {
      if (p[1] > top) {
        area += (p[0] - ref[0]) * (p[1] - top);
        top = p[1];
      }
    }
    return area;
  }
  const std::size_t k = dims - 1;
  std::sort(pts.begin(), pts.end(), [k](const double* a, const double* b) { return a[k] > b[k]; });
  double vol = 0.0;
  std::vector<const double*> slab;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    slab.push_back(pts[i]);
    const double lo = i + 1 < pts.size() ? pts[i + 1][k] : ref[k];
    const double height = pts[i][k] - lo;
    if (height > 0.0) vol += height * hv_recursive(slab, ref, k);
  }
  return vol;
}

}  // namespace detail

// Lebesgue measure of the union of boxes [ref, v]. Points not >= ref in every
// coordinate contribute nothing; `skipped` counts them.
inline double hypervolume(const std::vector<std::vector<double>>& points, std::span<const double> ref, std::size_t* skipped = nullptr) {
  std::vector<const double*> inside;
  std::size_t skip = 0;
  for (const auto& p : points) {
    if (p.size() != ref.size()) fail_validation("hypervolume: point has ", p.size(), " coordinates, reference ", ref.size());
    bool ok = true;
    for (std::size_t i = 0; i < p.size(); ++i) ok = ok && p[i] >= ref[i];
    if (ok)
      inside.push_back(p.data());
    else
      ++skip;
  }
  if (skipped) *skipped = skip;
  if (ref.empty()) return 0.0;
  return detail::hv_recursive(std::move(inside), ref.data(), ref.size());
}

inline double hypervolume(const ParetoSet& set, std::span<const double> ref) {
  std::size_t skipped = 0;
  const double hv = hypervolume(set.value_vectors(), ref, &skipped);
  if (skipped > 0) warn(std::to_string(skipped) + " Pareto member(s) below the reference point were skipped");
  return hv;
}

// Component-wise minimum minus 1% of each component's range.
inline std::vector<double> reference_point(const std::vector<std::vector<double>>& values) {
  if (values.empty()) return {};
  const std::size_t k = values.front().size();
  std::vector<double> lo(k, INFINITY), hi(k, -INFINITY);
  for (const auto& v : values)
    for (std::size_t i = 0; i < k; ++i) {
      lo[i] = std::min(lo[i], v[i]);
      hi[i] = std::max(hi[i], v[i]);
    }
  for (std::size_t i = 0; i < k; ++i) lo[i] -= 0.01 * (hi[i] - lo[i]);
  return lo;
}

}  // namespace mopol
