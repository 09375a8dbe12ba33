#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "mopol/common.hpp"
#include "mopol/weights.hpp"

namespace mopol {

// Sobol low-discrepancy sequence in Gray-code order with Joe-Kuo direction
// numbers (new-joe-kuo-6.21201, first 16 dimensions). An optional digital
// shift (XOR with seeded random words) scrambles the sequence.
class SobolSequence {
 public:
  static constexpr std::size_t kMaxDims = 16;
  static constexpr int kBits = 32;

  explicit SobolSequence(std::size_t dims, bool scramble = false, std::uint64_t seed = 0) : dims_(dims) {
    if (dims == 0 || dims > kMaxDims) fail_validation("Sobol dimension ", dims, " outside [1,", kMaxDims, "]");
    struct Poly {
      unsigned s, a;
      std::array<unsigned, 6> m;
    };
    static constexpr std::array<Poly, kMaxDims - 1> table{{
        {1, 0, {1}},
        {2, 1, {1, 3}},
        {3, 1, {1, 3, 1}},
        {3, 2, {1, 1, 1}},
        {4, 1, {1, 1, 3, 3}},
        {4, 4, {1, 3, 5, 13}},
        {5, 2, {1, 1, 5, 5, 17}},
        {5, 4, {1, 1, 5, 5, 5}},
        {5, 7, {1, 1, 7, 11, 19}},
        {5, 11, {1, 1, 5, 1, 1}},
        {5, 13, {1, 1, 1, 3, 11}},
        {5, 14, {1, 3, 5, 5, 31}},
        {6, 1, {1, 3, 3, 9, 7, 49}},
        {6, 13, {1, 1, 1, 15, 21, 21}},
        {6, 16, {1, 3, 1, 13, 27, 49}},
    }};
    directions_.assign(dims, std::vector<std::uint32_t>(kBits));
    for (int b = 0; b < kBits; ++b) directions_[0][b] = std::uint32_t{1} << (kBits - 1 - b);
    for (std::size_t j = 1; j < dims; ++j) {
      const auto& poly = table[j - 1];
      auto& v = directions_[j];
      for (unsigned b = 0; b < poly.s; ++b) v[b] = poly.m[b] << (kBits - 1 - b);
      for (unsigned b = poly.s; b < static_cast<unsigned>(kBits); ++b) {
        v[b] = v[b - poly.s] ^ (v[b - poly.s] >> poly.s);
        for (unsigned k = 1; k < poly.s; ++k)
          if ((poly.a >> (poly.s - 1 - k)) & 1u) v[b] ^= v[b - k];
      }
    }
    state_.assign(dims, 0);
    shift_.assign(dims, 0);
    if (scramble) {
      Rng rng(derive_seed(seed, 0x50b01ULL));
      for (auto& s : shift_) s = static_cast<std::uint32_t>(rng() >> 32);
    }
  }

  std::size_t dims() const { return dims_; }

  std::vector<double> next() {
    std::vector<double> out(dims_);
    for (std::size_t j = 0; j < dims_; ++j) out[j] = static_cast<double>(state_[j] ^ shift_[j]) / 4294967296.0;
    // Advance: flip the direction number at the lowest zero bit of the index.
    int c = 0;
    for (std::uint64_t i = index_; i & 1u; i >>= 1) ++c;
    for (std::size_t j = 0; j < dims_; ++j) state_[j] ^= directions_[j][static_cast<std::size_t>(c)];
    ++index_;
    return out;
  }

 private:
  std::size_t dims_;
  std::uint64_t index_ = 0;
  std::vector<std::vector<std::uint32_t>> directions_;
  std::vector<std::uint32_t> state_;
  std::vector<std::uint32_t> shift_;
};

// Maps the unit cube [0,1]^D onto the admissible weight vectors for N = D+1
// objectives. D = 1 maps u to lambda_0 = lo + u (hi - lo). For D >= 2 the
// sorted spacings of u give a uniform point on the simplex, whose first D
// coordinates are then mapped affinely into the box.
class SearchSpace {
 public:
  using Bounds = std::vector<std::pair<double, double>>;

  explicit SearchSpace(std::size_t objectives, Bounds bounds = {}) : objectives_(objectives), bounds_(std::move(bounds)) {
    if (objectives < 2) fail_validation("need at least 2 objectives to search weights, got ", objectives);
    const std::size_t D = objectives - 1;
    if (bounds_.empty()) bounds_.assign(D, {0.0, 1.0});
    if (bounds_.size() != D) fail_validation("weight bounds need ", D, " intervals, got ", bounds_.size());
    double lo_sum = 0.0, widest = 0.0;
    unit_ = true;
    for (auto [lo, hi] : bounds_) {
      if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) fail_validation("weight bound [", lo, ",", hi, "] not inside [0,1]");
      lo_sum += lo;
      widest = std::max(widest, hi - lo);
      unit_ = unit_ && lo == 0.0 && hi == 1.0;
    }
    if (D >= 2 && !unit_ && lo_sum + widest > 1.0 + kSimplexTolerance)
      fail_validation("weight bounds admit coordinates summing past 1");
  }

  std::size_t objectives() const { return objectives_; }
  std::size_t dims() const { return objectives_ - 1; }
  const Bounds& bounds() const { return bounds_; }

  WeightVector map(std::span<const double> u) const {
    const std::size_t D = dims();
    std::vector<double> c(D);
    if (D == 1) {
      c[0] = bounds_[0].first + std::clamp(u[0], 0.0, 1.0) * (bounds_[0].second - bounds_[0].first);
      return WeightVector({c[0], 1.0 - c[0]});
    }
    std::vector<double> s(u.begin(), u.end());
    for (double& v : s) v = std::clamp(v, 0.0, 1.0);
    std::sort(s.begin(), s.end());
    std::vector<double> w(D + 1);
    w[0] = s[0];
    for (std::size_t i = 1; i < D; ++i) w[i] = s[i] - s[i - 1];
    w[D] = 1.0 - s[D - 1];
    if (!unit_) {
      for (std::size_t i = 0; i < D; ++i) w[i] = bounds_[i].first + w[i] * (bounds_[i].second - bounds_[i].first);
      double sum = 0.0;
      for (std::size_t i = 0; i < D; ++i) sum += w[i];
      w[D] = std::max(0.0, 1.0 - sum);
    }
    return WeightVector(std::move(w));
  }

 private:
  std::size_t objectives_;
  Bounds bounds_;
  bool unit_ = true;
};

inline std::size_t sobol_init_count(std::size_t objectives) { return 2 * (objectives + 1); }

// 2 (N_y + 1) scrambled Sobol points over the weight search space.
inline std::vector<WeightVector> sobol_init(const SearchSpace& space, std::uint64_t seed) {
  SobolSequence seq(space.dims(), true, seed);
  std::vector<WeightVector> out;
  const std::size_t count = sobol_init_count(space.objectives());
  for (std::size_t i = 0; i < count; ++i) out.push_back(space.map(seq.next()));
  return out;
}

inline std::vector<WeightVector> sobol_init(std::size_t objectives, std::uint64_t seed = 0) {
  return sobol_init(SearchSpace(objectives), seed);
}

}  // namespace mopol
