#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mopol/common.hpp"
#include "mopol/csv.hpp"

namespace mopol {

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// n x d x N_y tensor indexed (unit, treatment, outcome).
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t n, std::size_t d, std::size_t k, double fill = 0.0) : n_(n), d_(d), k_(k), data_(n * d * k, fill) {}

  std::size_t units() const { return n_; }
  std::size_t treatments() const { return d_; }
  std::size_t outcomes() const { return k_; }
  double& operator()(std::size_t i, std::size_t w, std::size_t y) { return data_[(i * d_ + w) * k_ + y]; }
  double operator()(std::size_t i, std::size_t w, std::size_t y) const { return data_[(i * d_ + w) * k_ + y]; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t n_ = 0, d_ = 0, k_ = 0;
  std::vector<double> data_;
};

struct Provenance {
  std::string source;
  std::vector<std::string> warnings;
  // original_labels[w] is the file's label for internal treatment w.
  std::vector<long long> original_labels;
};

struct Dataset {
  Matrix covariates;            // n x p
  std::vector<int> treatments;  // values in [0, d)
  Matrix outcomes;              // n x N_y
  std::size_t num_treatments = 0;
  std::vector<std::string> covariate_names;
  std::vector<std::string> outcome_names;
  std::string treatment_name = "treatment";
  Provenance provenance;

  std::size_t size() const { return treatments.size(); }
  std::size_t num_covariates() const { return covariates.cols(); }
  std::size_t num_outcomes() const { return outcomes.cols(); }
};

struct NuisanceEstimates {
  Tensor3 outcome_model;  // m_hat(w, y | X_i)
  Matrix propensities;    // e_hat(w | X_i)
};

// Doubly-robust score tensor; the sole training signal for the tree fitters.
struct ScoreMatrix {
  Tensor3 scores;

  std::size_t units() const { return scores.units(); }
  std::size_t treatments() const { return scores.treatments(); }
  std::size_t outcomes() const { return scores.outcomes(); }
  double operator()(std::size_t i, std::size_t w, std::size_t y) const { return scores(i, w, y); }
  double& operator()(std::size_t i, std::size_t w, std::size_t y) { return scores(i, w, y); }

  friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;
};

enum class ColumnRole { covariate, treatment, outcome };

struct Schema {
  // Column name -> role. Columns absent from the map are ignored on load.
  std::map<std::string, ColumnRole> roles;
};

inline void validate(const Dataset& data) {
  const std::size_t n = data.size();
  if (n == 0) fail_validation("dataset has no rows");
  if (data.covariates.cols() == 0) fail_validation("dataset has no covariates");
  if (data.outcomes.cols() == 0) fail_validation("dataset has no outcomes");
  if (data.num_treatments < 2) fail_validation("dataset needs at least 2 treatments, found ", data.num_treatments);
  if (data.covariates.rows() != n || data.outcomes.rows() != n) fail_validation("dataset row counts disagree");
  std::vector<char> seen(data.num_treatments, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int w = data.treatments[i];
    if (w < 0 || static_cast<std::size_t>(w) >= data.num_treatments)
      fail_validation("row ", i, ": treatment ", w, " outside [0,", data.num_treatments, ")");
    seen[w] = 1;
  }
  for (std::size_t w = 0; w < seen.size(); ++w)
    if (!seen[w]) fail_validation("treatment ", w, " never observed");
  for (double v : data.covariates.data())
    if (!std::isfinite(v)) fail_validation("non-finite covariate");
  for (double v : data.outcomes.data())
    if (!std::isfinite(v)) fail_validation("non-finite outcome");
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open schema '", path, "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail_validation("schema '", path, "': ", e.what());
  }
  if (!j.is_object()) fail_validation("schema must be a JSON object of column -> role");
  Schema s;
  for (auto& [col, role] : j.items()) {
    if (!role.is_string()) fail_validation("schema role for '", col, "' must be a string");
    const auto r = role.get<std::string>();
    if (r == "covariate")
      s.roles[col] = ColumnRole::covariate;
    else if (r == "treatment")
      s.roles[col] = ColumnRole::treatment;
    else if (r == "outcome")
      s.roles[col] = ColumnRole::outcome;
    else
      fail_validation("schema role '", r, "' for column '", col, "' is not covariate|treatment|outcome");
  }
  return s;
}

// Reads a dataset CSV. Row order is preserved; treatment labels that are not
// exactly {0,...,d-1} are relabeled in sorted order with a recorded warning.
inline Dataset load_dataset(const std::string& path, const Schema& schema) {
  std::size_t n_treat = 0, n_out = 0, n_cov = 0;
  for (auto& [_, role] : schema.roles) {
    n_treat += role == ColumnRole::treatment;
    n_out += role == ColumnRole::outcome;
    n_cov += role == ColumnRole::covariate;
  }
  if (n_treat != 1) fail_validation("schema must name exactly one treatment column, found ", n_treat);
  if (n_out == 0) fail_validation("schema names no outcome column");
  if (n_cov == 0) fail_validation("schema names no covariate column");

  const csv::Table table = csv::read(path);
  std::vector<std::size_t> cov_cols, out_cols;
  std::size_t treat_col = 0;
  Dataset d;
  d.provenance.source = path;
  for (auto& [col, role] : schema.roles) {
    if (std::find(table.header.begin(), table.header.end(), col) == table.header.end())
      fail_validation("schema column '", col, "' not found in '", path, "'");
  }
  // File column order defines covariate/outcome order.
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    auto it = schema.roles.find(table.header[j]);
    if (it == schema.roles.end()) continue;
    switch (it->second) {
      case ColumnRole::covariate:
        cov_cols.push_back(j);
        d.covariate_names.push_back(table.header[j]);
        break;
      case ColumnRole::outcome:
        out_cols.push_back(j);
        d.outcome_names.push_back(table.header[j]);
        break;
      case ColumnRole::treatment:
        treat_col = j;
        d.treatment_name = table.header[j];
        break;
    }
  }

  const std::size_t n = table.rows.size();
  if (n == 0) fail_validation("'", path, "' has no data rows");
  d.covariates = Matrix(n, cov_cols.size());
  d.outcomes = Matrix(n, out_cols.size());
  std::vector<long long> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = table.rows[i];
    auto cell = [&](std::size_t j, double& v) {
      if (r[j].empty()) fail_validation("missing value at row ", i + 1, ", column '", table.header[j], "'");
      if (!csv::parse_double(r[j], v))
        fail_validation("non-numeric value '", r[j], "' at row ", i + 1, ", column '", table.header[j], "'");
    };
    for (std::size_t c = 0; c < cov_cols.size(); ++c) cell(cov_cols[c], d.covariates(i, c));
    for (std::size_t c = 0; c < out_cols.size(); ++c) cell(out_cols[c], d.outcomes(i, c));
    if (r[treat_col].empty()) fail_validation("missing value at row ", i + 1, ", column '", table.header[treat_col], "'");
    if (!csv::parse_long(r[treat_col], raw[i]))
      fail_validation("non-integer treatment '", r[treat_col], "' at row ", i + 1);
  }

  std::set<long long> labels(raw.begin(), raw.end());
  d.num_treatments = labels.size();
  d.provenance.original_labels.assign(labels.begin(), labels.end());
  std::map<long long, int> index;
  int next = 0;
  for (long long l : labels) index[l] = next++;
  bool contiguous = true;
  for (auto& [l, w] : index) contiguous = contiguous && l == w;
  if (!contiguous) {
    std::string msg = "treatment labels relabeled:";
    for (auto& [l, w] : index) msg += " " + std::to_string(l) + "->" + std::to_string(w);
    d.provenance.warnings.push_back(msg);
    warn(msg);
  }
  d.treatments.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.treatments[i] = index[raw[i]];
  validate(d);
  return d;
}

// Writes the dataset CSV (covariates, treatment, outcomes) and its schema.
// Treatments are written with their original labels.
inline void write_dataset(const Dataset& d, const std::string& csv_path, const std::string& schema_path) {
  csv::Writer w(csv_path);
  std::vector<std::string> header = d.covariate_names;
  header.push_back(d.treatment_name);
  header.insert(header.end(), d.outcome_names.begin(), d.outcome_names.end());
  w.row(header);
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<std::string> cells;
    for (std::size_t j = 0; j < d.num_covariates(); ++j) cells.push_back(csv::format_double(d.covariates(i, j)));
    const long long label = d.provenance.original_labels.empty()
                                ? d.treatments[i]
                                : d.provenance.original_labels[static_cast<std::size_t>(d.treatments[i])];
    cells.push_back(std::to_string(label));
    for (std::size_t y = 0; y < d.num_outcomes(); ++y) cells.push_back(csv::format_double(d.outcomes(i, y)));
    w.row(cells);
  }
  nlohmann::ordered_json s;
  for (auto& c : d.covariate_names) s[c] = "covariate";
  s[d.treatment_name] = "treatment";
  for (auto& c : d.outcome_names) s[c] = "outcome";
  std::ofstream out(schema_path);
  if (!out) fail_validation("cannot write '", schema_path, "'");
  out << s.dump(2) << '\n';
}

inline void validate(const NuisanceEstimates& nu, const Dataset& data) {
  const std::size_t n = data.size(), d = data.num_treatments, k = data.num_outcomes();
  if (nu.outcome_model.units() != n || nu.outcome_model.treatments() != d || nu.outcome_model.outcomes() != k)
    fail_validation("outcome model is ", nu.outcome_model.units(), "x", nu.outcome_model.treatments(), "x",
                    nu.outcome_model.outcomes(), ", expected ", n, "x", d, "x", k);
  if (nu.propensities.rows() != n || nu.propensities.cols() != d)
    fail_validation("propensities are ", nu.propensities.rows(), "x", nu.propensities.cols(), ", expected ", n, "x", d);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t w = 0; w < d; ++w) {
      const double e = nu.propensities(i, w);
      if (!(e > 0.0 && e < 1.0)) fail_validation("row ", i, ": propensity ", e, " for treatment ", w, " not in (0,1)");
      sum += e;
    }
    if (std::abs(sum - 1.0) > 1e-8) fail_validation("row ", i, ": propensities sum to ", sum);
  }
  for (double v : nu.outcome_model.data())
    if (!std::isfinite(v)) fail_validation("non-finite outcome-model prediction");
}

// Gamma_{i,w,y} = m(w,y|X_i) + 1{W_i = w} (Y_{i,y} - m(w,y|X_i)) / e(w|X_i).
inline ScoreMatrix aipw_scores(const Dataset& data, const NuisanceEstimates& nu, double propensity_floor = 1e-3) {
  validate(nu, data);
  const std::size_t n = data.size(), d = data.num_treatments, k = data.num_outcomes();
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t w = 0; w < d; ++w)
      if (nu.propensities(i, w) <= propensity_floor) {
        bad.push_back(i);
        break;
      }
  if (!bad.empty()) {
    std::string rows;
    for (std::size_t r = 0; r < bad.size() && r < 20; ++r) rows += (r ? "," : "") + std::to_string(bad[r]);
    if (bad.size() > 20) rows += ",...";
    fail_validation(bad.size(), " row(s) have a propensity <= floor ", propensity_floor, ": rows ", rows);
  }
  ScoreMatrix s{Tensor3(n, d, k)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t w = 0; w < d; ++w)
      for (std::size_t y = 0; y < k; ++y) {
        const double m = nu.outcome_model(i, w, y);
        double g = m;
        if (static_cast<std::size_t>(data.treatments[i]) == w) g += (data.outcomes(i, y) - m) / nu.propensities(i, w);
        s(i, w, y) = g;
      }
  return s;
}

inline void validate(const ScoreMatrix& s) {
  if (s.units() == 0 || s.treatments() < 2 || s.outcomes() == 0)
    fail_validation("score matrix must be n>=1 x d>=2 x N_y>=1, got ", s.units(), "x", s.treatments(), "x", s.outcomes());
  for (double v : s.scores.data())
    if (!std::isfinite(v)) fail_validation("score matrix has a non-finite entry");
}

inline void write_scores(const ScoreMatrix& s, const std::string& path) {
  csv::Writer w(path);
  w.row("row", "treatment", "outcome", "score");
  for (std::size_t i = 0; i < s.units(); ++i)
    for (std::size_t t = 0; t < s.treatments(); ++t)
      for (std::size_t y = 0; y < s.outcomes(); ++y) w.row(i, t, y, s(i, t, y));
}

namespace detail {

inline std::size_t index_cell(const csv::Table& t, std::size_t r, std::size_t col, const std::string& path) {
  long long v = 0;
  if (!csv::parse_long(t.rows[r][col], v) || v < 0)
    fail_validation(path, ": bad index '", t.rows[r][col], "' in column '", t.header[col], "' (line ", r + 2, ")");
  return static_cast<std::size_t>(v);
}

inline double value_cell(const csv::Table& t, std::size_t r, std::size_t col, const std::string& path) {
  double v = 0;
  if (!csv::parse_double(t.rows[r][col], v))
    fail_validation(path, ": bad value '", t.rows[r][col], "' in column '", t.header[col], "' (line ", r + 2, ")");
  return v;
}

}  // namespace detail

// Reads a dense (row, treatment, outcome) -> value table into a tensor.
inline Tensor3 read_dense3(const std::string& path, const std::string& value_column) {
  const auto t = csv::read(path);
  const std::size_t cr = t.column("row"), ct = t.column("treatment"), co = t.column("outcome"),
                    cv = t.column(value_column);
  std::size_t n = 0, d = 0, k = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    n = std::max(n, detail::index_cell(t, r, cr, path) + 1);
    d = std::max(d, detail::index_cell(t, r, ct, path) + 1);
    k = std::max(k, detail::index_cell(t, r, co, path) + 1);
  }
  if (t.rows.size() != n * d * k)
    fail_validation(path, ": ", t.rows.size(), " rows but the ", n, "x", d, "x", k, " cross-product needs ", n * d * k);
  Tensor3 out(n, d, k);
  std::vector<char> seen(n * d * k, 0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::size_t i = detail::index_cell(t, r, cr, path), w = detail::index_cell(t, r, ct, path),
                      y = detail::index_cell(t, r, co, path);
    auto& flag = seen[(i * d + w) * k + y];
    if (flag) fail_validation(path, ": duplicate entry for row ", i, ", treatment ", w, ", outcome ", y);
    flag = 1;
    out(i, w, y) = detail::value_cell(t, r, cv, path);
  }
  return out;
}

inline ScoreMatrix read_scores(const std::string& path) {
  ScoreMatrix s{read_dense3(path, "score")};
  validate(s);
  return s;
}

inline void write_nuisance(const NuisanceEstimates& nu, const std::string& mhat_path, const std::string& ehat_path) {
  {
    csv::Writer w(mhat_path);
    w.row("row", "treatment", "outcome", "mhat");
    const auto& m = nu.outcome_model;
    for (std::size_t i = 0; i < m.units(); ++i)
      for (std::size_t t = 0; t < m.treatments(); ++t)
        for (std::size_t y = 0; y < m.outcomes(); ++y) w.row(i, t, y, m(i, t, y));
  }
  csv::Writer w(ehat_path);
  w.row("row", "treatment", "ehat");
  for (std::size_t i = 0; i < nu.propensities.rows(); ++i)
    for (std::size_t t = 0; t < nu.propensities.cols(); ++t) w.row(i, t, nu.propensities(i, t));
}

inline NuisanceEstimates read_nuisance(const std::string& mhat_path, const std::string& ehat_path) {
  NuisanceEstimates nu;
  nu.outcome_model = read_dense3(mhat_path, "mhat");
  const auto t = csv::read(ehat_path);
  const std::size_t cr = t.column("row"), ct = t.column("treatment"), cv = t.column("ehat");
  std::size_t n = 0, d = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    n = std::max(n, detail::index_cell(t, r, cr, ehat_path) + 1);
    d = std::max(d, detail::index_cell(t, r, ct, ehat_path) + 1);
  }
  if (t.rows.size() != n * d) fail_validation(ehat_path, ": propensity table is not dense over row x treatment");
  nu.propensities = Matrix(n, d, -1.0);
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    nu.propensities(detail::index_cell(t, r, cr, ehat_path), detail::index_cell(t, r, ct, ehat_path)) =
        detail::value_cell(t, r, cv, ehat_path);
  return nu;
}

}  // namespace mopol
