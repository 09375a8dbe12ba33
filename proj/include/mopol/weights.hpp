#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mopol/common.hpp"

namespace mopol {

inline constexpr double kSimplexTolerance = 1e-9;

// A point on the probability simplex weighting the objectives. Construction
// validates; there is no silent renormalization.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> w) : w_(std::move(w)) {
    if (w_.empty()) fail_validation("weight vector is empty");
    double sum = 0.0;
    for (double v : w_) {
      if (!std::isfinite(v) || v < 0.0) fail_validation("weight ", v, " is negative or non-finite");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) fail_validation("weights sum to ", sum, ", not 1");
  }

  // From the first N-1 simplex coordinates; the last weight is the remainder.
  // Tiny negative remainders from rounding are clamped to zero.
  static WeightVector from_coordinates(std::span<const double> coords) {
    std::vector<double> w(coords.begin(), coords.end());
    double sum = 0.0;
    for (double v : w) sum += v;
    double last = 1.0 - sum;
    if (last < 0.0 && last > -kSimplexTolerance) last = 0.0;
    w.push_back(last);
    return WeightVector(std::move(w));
  }

  static WeightVector one_hot(std::size_t size, std::size_t k) {
    std::vector<double> w(size, 0.0);
    w.at(k) = 1.0;
    return WeightVector(std::move(w));
  }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  const std::vector<double>& values() const { return w_; }
  std::vector<double> coordinates() const { return {w_.begin(), w_.end() - 1}; }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::vector<double> w_;
};

}  // namespace mopol
