#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mopol/common.hpp"
#include "mopol/data.hpp"

namespace mopol::synth {

// coef * x_feature * 1{x_gate > threshold}; with gate < 0 the term is plain
// linear.
struct GatedTerm {
  int feature = 0;
  int gate = -1;
  double threshold = 0.0;
  double coef = 0.0;
};

// coef * 1{x_feature > threshold}
struct StepTerm {
  int feature = 0;
  double threshold = 0.0;
  double coef = 0.0;
};

// Conditional mean of one potential outcome as a function of X.
struct MeanFunction {
  double constant = 0.0;
  std::vector<double> linear;  // length p or empty
  std::vector<StepTerm> steps;
  std::vector<GatedTerm> gated;

  double operator()(std::span<const double> x) const {
    double v = constant;
    for (std::size_t j = 0; j < linear.size(); ++j) v += linear[j] * x[j];
    for (const auto& s : steps) v += x[s.feature] > s.threshold ? s.coef : 0.0;
    for (const auto& g : gated)
      if (g.gate < 0 || x[g.gate] > g.threshold) v += g.coef * x[g.feature];
    return v;
  }
};

enum class PropensityKind { constant, logistic };

struct Propensity {
  PropensityKind kind = PropensityKind::constant;
  std::vector<double> probs;                   // constant: length d
  std::vector<double> intercept;               // logistic: length d (treatment 0 is the base)
  std::vector<std::vector<double>> coef;       // logistic: d x p

  std::vector<double> operator()(std::span<const double> x, std::size_t d) const {
    if (kind == PropensityKind::constant) return probs;
    std::vector<double> eta(d, 0.0);
    for (std::size_t w = 0; w < d; ++w) {
      eta[w] = intercept.empty() ? 0.0 : intercept[w];
      if (!coef.empty())
        for (std::size_t j = 0; j < x.size() && j < coef[w].size(); ++j) eta[w] += coef[w][j] * x[j];
    }
    const double mx = *std::max_element(eta.begin(), eta.end());
    double z = 0.0;
    for (double& e : eta) z += (e = std::exp(e - mx));
    for (double& e : eta) e /= z;
    return eta;
  }
};

// A data-generating process with known nuisances.
struct DgpSpec {
  std::size_t n = 1000;
  std::size_t p = 2;
  std::size_t treatments = 2;
  std::size_t outcomes = 2;
  double covariate_low = -1.0;
  double covariate_high = 1.0;
  Propensity propensity;
  std::vector<double> noise_sd;                   // per outcome
  std::vector<std::vector<MeanFunction>> mean;    // [treatment][outcome]

  void validate() const {
    if (n < 1 || p < 1 || treatments < 2 || outcomes < 1) fail_validation("DGP needs n>=1, p>=1, d>=2, N_y>=1");
    if (!(covariate_high > covariate_low)) fail_validation("DGP covariate range is empty");
    if (mean.size() != treatments) fail_validation("DGP mean table must have one row per treatment");
    for (const auto& row : mean) {
      if (row.size() != outcomes) fail_validation("DGP mean table must have one entry per outcome");
      for (const auto& f : row) {
        if (!f.linear.empty() && f.linear.size() != p) fail_validation("DGP linear coefficients must have length p");
        for (const auto& s : f.steps)
          if (s.feature < 0 || static_cast<std::size_t>(s.feature) >= p) fail_validation("DGP step feature out of range");
        for (const auto& g : f.gated)
          if (g.feature < 0 || static_cast<std::size_t>(g.feature) >= p || g.gate >= static_cast<int>(p))
            fail_validation("DGP gated term feature out of range");
      }
    }
    if (noise_sd.size() != outcomes) fail_validation("DGP noise_sd must have one entry per outcome");
    for (double s : noise_sd)
      if (!(s >= 0.0)) fail_validation("DGP noise_sd must be non-negative");
    if (propensity.kind == PropensityKind::constant) {
      if (propensity.probs.size() != treatments) fail_validation("constant propensity needs one probability per treatment");
      double sum = 0.0;
      for (double e : propensity.probs) {
        if (!(e > 0.0 && e < 1.0)) fail_validation("degenerate propensity ", e, ": every arm needs probability in (0,1)");
        sum += e;
      }
      if (std::abs(sum - 1.0) > 1e-8) fail_validation("constant propensities sum to ", sum);
    } else {
      if (!propensity.intercept.empty() && propensity.intercept.size() != treatments)
        fail_validation("logistic intercept must have one entry per treatment");
      if (!propensity.coef.empty() && propensity.coef.size() != treatments)
        fail_validation("logistic coef must have one row per treatment");
    }
  }
};

struct Sample {
  Dataset dataset;
  NuisanceEstimates nuisance;
  ScoreMatrix scores;
};

// Draws X uniformly on the covariate box, W from the propensity model and
// Y = m(W, X) + noise. Returned nuisances are the true m and e.
inline Sample generate(const DgpSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.n, p = spec.p, d = spec.treatments, k = spec.outcomes;
  Rng rng(derive_seed(seed, 0x5eedULL));
  std::uniform_real_distribution<double> unif(spec.covariate_low, spec.covariate_high);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Sample s;
  Dataset& data = s.dataset;
  data.covariates = Matrix(n, p);
  data.outcomes = Matrix(n, k);
  data.treatments.resize(n);
  data.num_treatments = d;
  for (std::size_t j = 0; j < p; ++j) data.covariate_names.push_back("x" + std::to_string(j));
  for (std::size_t y = 0; y < k; ++y) data.outcome_names.push_back("y" + std::to_string(y));
  data.treatment_name = "w";
  data.provenance.source = "synthetic";
  for (std::size_t w = 0; w < d; ++w) data.provenance.original_labels.push_back(static_cast<long long>(w));

  s.nuisance.outcome_model = Tensor3(n, d, k);
  s.nuisance.propensities = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) data.covariates(i, j) = unif(rng);
    const auto x = data.covariates.row(i);
    const auto e = spec.propensity(x, d);
    for (std::size_t w = 0; w < d; ++w) s.nuisance.propensities(i, w) = e[w];
    const double u = u01(rng);
    double acc = 0.0;
    std::size_t w_i = d - 1;
    for (std::size_t w = 0; w < d; ++w) {
      acc += e[w];
      if (u < acc) {
        w_i = w;
        break;
      }
    }
    data.treatments[i] = static_cast<int>(w_i);
    for (std::size_t w = 0; w < d; ++w)
      for (std::size_t y = 0; y < k; ++y) s.nuisance.outcome_model(i, w, y) = spec.mean[w][y](x);
    for (std::size_t y = 0; y < k; ++y)
      data.outcomes(i, y) = s.nuisance.outcome_model(i, w_i, y) + spec.noise_sd[y] * normal(rng);
  }
  // Small samples can miss an arm; the dataset invariant needs every arm.
  std::vector<char> seen(d, 0);
  for (int w : data.treatments) seen[w] = 1;
  for (std::size_t w = 0; w < d; ++w)
    if (!seen[w]) fail_validation("synthetic sample of n=", n, " never assigned treatment ", w, "; increase n");
  validate(data);
  s.scores = aipw_scores(data, s.nuisance, 0.0);
  return s;
}

// E[Y(w)]_y approximated by averaging m(w,y|X) over draws of X.
inline Matrix potential_outcome_means(const DgpSpec& spec, std::size_t draws, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(spec.covariate_low, spec.covariate_high);
  Matrix means(spec.treatments, spec.outcomes);
  std::vector<double> x(spec.p);
  for (std::size_t r = 0; r < draws; ++r) {
    for (auto& v : x) v = unif(rng);
    for (std::size_t w = 0; w < spec.treatments; ++w)
      for (std::size_t y = 0; y < spec.outcomes; ++y) means(w, y) += spec.mean[w][y](x);
  }
  for (std::size_t w = 0; w < spec.treatments; ++w)
    for (std::size_t y = 0; y < spec.outcomes; ++y) means(w, y) /= static_cast<double>(draws);
  return means;
}

// --- JSON ------------------------------------------------------------------

inline MeanFunction mean_from_json(const nlohmann::json& j) {
  MeanFunction f;
  if (j.is_number()) {
    f.constant = j.get<double>();
    return f;
  }
  f.constant = j.value("const", 0.0);
  if (j.contains("linear")) f.linear = j["linear"].get<std::vector<double>>();
  if (j.contains("steps"))
    for (const auto& s : j["steps"])
      f.steps.push_back({s.at("feature").get<int>(), s.value("threshold", 0.0), s.at("coef").get<double>()});
  if (j.contains("gated"))
    for (const auto& g : j["gated"])
      f.gated.push_back({g.at("feature").get<int>(), g.value("gate", -1), g.value("threshold", 0.0), g.at("coef").get<double>()});
  return f;
}

inline nlohmann::json mean_to_json(const MeanFunction& f) {
  nlohmann::json j;
  j["const"] = f.constant;
  if (!f.linear.empty()) j["linear"] = f.linear;
  for (const auto& s : f.steps) j["steps"].push_back({{"feature", s.feature}, {"threshold", s.threshold}, {"coef", s.coef}});
  for (const auto& g : f.gated)
    j["gated"].push_back({{"feature", g.feature}, {"gate", g.gate}, {"threshold", g.threshold}, {"coef", g.coef}});
  return j;
}

inline DgpSpec spec_from_json(const nlohmann::json& j) {
  try {
    DgpSpec s;
    s.n = j.at("n").get<std::size_t>();
    s.p = j.at("p").get<std::size_t>();
    s.treatments = j.value("treatments", std::size_t{2});
    s.outcomes = j.value("outcomes", std::size_t{1});
    if (j.contains("covariates")) {
      s.covariate_low = j["covariates"].value("low", -1.0);
      s.covariate_high = j["covariates"].value("high", 1.0);
    }
    const auto& pj = j.at("propensity");
    const auto kind = pj.at("kind").get<std::string>();
    if (kind == "constant") {
      s.propensity.kind = PropensityKind::constant;
      s.propensity.probs = pj.at("probs").get<std::vector<double>>();
    } else if (kind == "logistic") {
      s.propensity.kind = PropensityKind::logistic;
      if (pj.contains("intercept")) s.propensity.intercept = pj["intercept"].get<std::vector<double>>();
      if (pj.contains("coef")) s.propensity.coef = pj["coef"].get<std::vector<std::vector<double>>>();
    } else {
      fail_validation("propensity kind '", kind, "' is not constant|logistic");
    }
    s.noise_sd = j.contains("noise_sd") ? j["noise_sd"].get<std::vector<double>>() : std::vector<double>(s.outcomes, 1.0);
    for (const auto& row : j.at("mean")) {
      std::vector<MeanFunction> r;
      for (const auto& f : row) r.push_back(mean_from_json(f));
      s.mean.push_back(std::move(r));
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail_validation("DGP spec: ", e.what());
  }
}

inline nlohmann::json spec_to_json(const DgpSpec& s) {
  nlohmann::json j;
  j["n"] = s.n;
  j["p"] = s.p;
  j["treatments"] = s.treatments;
  j["outcomes"] = s.outcomes;
  j["covariates"] = {{"low", s.covariate_low}, {"high", s.covariate_high}};
  if (s.propensity.kind == PropensityKind::constant) {
    j["propensity"] = {{"kind", "constant"}, {"probs", s.propensity.probs}};
  } else {
    j["propensity"] = {{"kind", "logistic"}, {"intercept", s.propensity.intercept}, {"coef", s.propensity.coef}};
  }
  j["noise_sd"] = s.noise_sd;
  for (const auto& row : s.mean) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& f : row) r.push_back(mean_to_json(f));
    j["mean"].push_back(r);
  }
  return j;
}

inline DgpSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open DGP spec '", path, "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail_validation("DGP spec '", path, "': ", e.what());
  }
  return spec_from_json(j);
}

// --- presets ---------------------------------------------------------------

// Two outcomes, binary treatment, p = 2. The treatment effect on outcome 0 is
// tau(x) = x0 + 0.2. On outcome 1 it agrees with tau where x1 <= 0 and is
// reversed (plus a smooth x1 term) where x1 > 0, so weighting the outcomes
// trades one against the other for half the units.
inline DgpSpec tradeoff(std::size_t n) {
  DgpSpec s;
  s.n = n;
  s.p = 2;
  s.treatments = 2;
  s.outcomes = 2;
  s.propensity.kind = PropensityKind::logistic;
  s.propensity.intercept = {0.0, 0.0};
  s.propensity.coef = {{0.0, 0.0}, {0.5, 0.0}};
  s.noise_sd = {1.0, 1.0};
  MeanFunction base0;
  base0.linear = {0.0, 0.5};
  MeanFunction base1;
  base1.linear = {0.3, 0.0};
  MeanFunction treat0 = base0;
  treat0.constant += 0.2;
  treat0.linear[0] += 1.0;
  MeanFunction treat1 = base1;
  treat1.constant += 0.2;
  treat1.linear[0] += 1.0;
  // Where x1 > 0: effect becomes -(x0 + 0.2) + 0.8 x1.
  treat1.steps.push_back({1, 0.0, -0.4});
  treat1.gated.push_back({0, 1, 0.0, -2.0});
  treat1.gated.push_back({1, 1, 0.0, 0.8});
  s.mean = {{base0, base1}, {treat0, treat1}};
  return s;
}

// Every arm has the same conditional mean on every outcome.
inline DgpSpec null_effect(std::size_t n, std::size_t treatments = 2, std::size_t outcomes = 2) {
  DgpSpec s;
  s.n = n;
  s.p = 2;
  s.treatments = treatments;
  s.outcomes = outcomes;
  s.propensity.probs.assign(treatments, 1.0 / static_cast<double>(treatments));
  s.noise_sd.assign(outcomes, 1.0);
  MeanFunction f;
  f.constant = 1.0;
  f.linear = {0.5, -0.5};
  s.mean.assign(treatments, std::vector<MeanFunction>(outcomes, f));
  return s;
}

}  // namespace mopol::synth
