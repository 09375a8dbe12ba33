#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mopol/common.hpp"
#include "mopol/csv.hpp"
#include "mopol/driver.hpp"
#include "mopol/pareto.hpp"
#include "mopol/policy_tree.hpp"

namespace mopol::io {

using nlohmann::json;

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_validation("cannot write ", path);
  out << text;
  if (!out) fail_validation("write to ", path, " failed");
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_validation("cannot open ", path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    fail_validation(path, ": ", e.what());
  }
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) fail_validation("cannot create output directory ", dir);
}

// --- metrics ---------------------------------------------------------------

// "outcome:<y>" or "neg_leaf_count".
inline ObjectiveMetric parse_metric(const std::string& s) {
  if (s == "neg_leaf_count") return ObjectiveMetric::negative_leaf_count();
  if (s.rfind("outcome:", 0) == 0) return ObjectiveMetric::for_outcome(static_cast<std::size_t>(csv::to_long(s.substr(8), "metric")));
  fail_validation("unknown metric '", s, "' (expected outcome:<y> or neg_leaf_count)");
}

inline std::string metric_spec(const ObjectiveMetric& m) {
  if (m.is_outcome()) return "outcome:" + std::to_string(m.outcome);
  return m.name;
}

// --- config ----------------------------------------------------------------

inline MopolConfig config_from_json(const json& j) {
  static const std::vector<std::string> known = {"tree", "replicates", "budget", "acquisition", "se_mode",
                                                 "seed", "metrics", "weight_bounds", "gp"};
  for (auto& [k, _] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) fail_validation("config: unknown key '", k, "'");
  MopolConfig c;
  try {
    if (j.contains("tree")) {
      const auto& t = j["tree"];
      for (auto& [k, _] : t.items())
        if (k != "kind" && k != "depth" && k != "lookahead" && k != "split_rule" && k != "value_epsilon" && k != "features" &&
            k != "feasibility_limit")
          fail_validation("config: unknown key 'tree.", k, "'");
      if (t.contains("kind")) c.tree.kind = parse_fitter(t["kind"].get<std::string>());
      if (t.contains("depth")) c.tree.depth = t["depth"].get<std::size_t>();
      if (t.contains("lookahead")) c.tree.lookahead = t["lookahead"].get<std::size_t>();
      if (t.contains("split_rule")) {
        const auto r = t["split_rule"].get<std::string>();
        if (r == "midpoint")
          c.tree.split_rule = SplitRule::midpoint;
        else if (r == "lower_value")
          c.tree.split_rule = SplitRule::lower_value;
        else
          fail_validation("config: tree.split_rule '", r, "' is not midpoint|lower_value");
      }
      if (t.contains("value_epsilon")) c.tree.value_epsilon = t["value_epsilon"].get<double>();
      if (t.contains("features")) c.tree.feature_mask = t["features"].get<std::vector<std::size_t>>();
      if (t.contains("feasibility_limit")) c.tree.feasibility_limit = t["feasibility_limit"].get<double>();
    }
    if (j.contains("replicates")) c.replicates = j["replicates"].get<std::size_t>();
    if (j.contains("budget")) {
      const auto& b = j["budget"];
      c.budget = {};
      if (b.contains("iterations")) c.budget.iterations = b["iterations"].get<std::size_t>();
      if (b.contains("seconds")) c.budget.seconds = b["seconds"].get<double>();
      c.budget.validate();
    }
    if (j.contains("acquisition")) {
      const auto& a = j["acquisition"];
      if (a.contains("mc_samples")) c.acquisition.mc_samples = a["mc_samples"].get<std::size_t>();
      if (a.contains("candidate_grid")) c.acquisition.candidate_grid = a["candidate_grid"].get<std::size_t>();
      if (a.contains("refine_steps")) c.acquisition.refine_steps = a["refine_steps"].get<std::size_t>();
      if (a.contains("q")) c.acquisition.q = a["q"].get<std::size_t>();
    }
    if (j.contains("se_mode")) c.se_mode = parse_se_mode(j["se_mode"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("metrics"))
      for (const auto& m : j["metrics"]) c.metrics.push_back(parse_metric(m.get<std::string>()));
    if (j.contains("weight_bounds"))
      for (const auto& b : j["weight_bounds"]) c.weight_bounds.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
    if (j.contains("gp")) {
      const auto& g = j["gp"];
      if (g.contains("lengthscale_min")) c.gp.lengthscale_min = g["lengthscale_min"].get<double>();
      if (g.contains("lengthscale_max")) c.gp.lengthscale_max = g["lengthscale_max"].get<double>();
      if (g.contains("signal_min")) c.gp.signal_min = g["signal_min"].get<double>();
      if (g.contains("signal_max")) c.gp.signal_max = g["signal_max"].get<double>();
    }
  } catch (const json::exception& e) {
    fail_validation("config: ", e.what());
  }
  if (c.replicates < 2) fail_validation("config: replicates must be >= 2, got ", c.replicates);
  c.acquisition.validate();
  return c;
}

inline json config_to_json(const MopolConfig& c) {
  json t{{"kind", to_string(c.tree.kind)},
         {"depth", c.tree.depth},
         {"lookahead", c.tree.lookahead},
         {"split_rule", c.tree.split_rule == SplitRule::midpoint ? "midpoint" : "lower_value"},
         {"value_epsilon", c.tree.value_epsilon},
         {"features", c.tree.feature_mask},
         {"feasibility_limit", c.tree.feasibility_limit}};
  json b = json::object();
  if (c.budget.iterations) b["iterations"] = *c.budget.iterations;
  if (c.budget.seconds) b["seconds"] = *c.budget.seconds;
  json metrics = json::array();
  for (const auto& m : c.metrics) metrics.push_back(metric_spec(m));
  json bounds = json::array();
  for (auto [lo, hi] : c.weight_bounds) bounds.push_back({lo, hi});
  return {{"tree", t},
          {"replicates", c.replicates},
          {"budget", b},
          {"acquisition",
           {{"mc_samples", c.acquisition.mc_samples},
            {"candidate_grid", c.acquisition.candidate_grid},
            {"refine_steps", c.acquisition.refine_steps},
            {"q", c.acquisition.q}}},
          {"se_mode", to_string(c.se_mode)},
          {"seed", c.seed},
          {"metrics", metrics},
          {"weight_bounds", bounds},
          {"gp",
           {{"lengthscale_min", c.gp.lengthscale_min},
            {"lengthscale_max", c.gp.lengthscale_max},
            {"signal_min", c.gp.signal_min},
            {"signal_max", c.gp.signal_max}}}};
}

inline MopolConfig load_config(const std::string& path) { return config_from_json(read_json(path)); }

// --- frontier --------------------------------------------------------------

struct Frontier {
  std::vector<std::string> metric_names;
  std::vector<EvaluatedPoint> points;
  std::vector<double> reference;
  double hypervolume = 0.0;
  std::size_t evaluations = 0;
  bool partial = false;
};

inline Frontier frontier_of(const MopolResult& r) {
  return {r.metric_names, r.pareto.members(), r.reference, r.hypervolume, r.evaluations.size(), r.partial};
}

// No wall-clock fields, so equal seeds give byte-identical files.
inline json frontier_to_json(const Frontier& f) {
  json pts = json::array();
  for (const auto& p : f.points) {
    json e{{"iteration", p.iteration}, {"lambda", p.lambda.values()}, {"values", p.values}, {"ses", p.ses}, {"kind", p.kind}};
    if (p.tree) e["tree"] = tree_to_json(*p.tree);
    pts.push_back(std::move(e));
  }
  return {{"metrics", f.metric_names}, {"reference", f.reference}, {"hypervolume", f.hypervolume},
          {"evaluations", f.evaluations}, {"partial", f.partial}, {"points", pts}};
}

inline Frontier frontier_from_json(const json& j) {
  Frontier f;
  try {
    f.metric_names = j.at("metrics").get<std::vector<std::string>>();
    f.reference = j.at("reference").get<std::vector<double>>();
    f.hypervolume = j.at("hypervolume").get<double>();
    f.evaluations = j.at("evaluations").get<std::size_t>();
    f.partial = j.at("partial").get<bool>();
    for (const auto& e : j.at("points")) {
      EvaluatedPoint p;
      p.iteration = e.at("iteration").get<std::size_t>();
      p.lambda = WeightVector(e.at("lambda").get<std::vector<double>>());
      p.values = e.at("values").get<std::vector<double>>();
      p.ses = e.at("ses").get<std::vector<double>>();
      p.kind = e.at("kind").get<std::string>();
      if (e.contains("tree")) p.tree = tree_from_json(e["tree"]);
      f.points.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    fail_validation("frontier JSON: ", e.what());
  }
  return f;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_frontier_json(const Frontier& f, const std::string& path) { write_text(path, dump(frontier_to_json(f))); }
inline Frontier read_frontier_json(const std::string& path) { return frontier_from_json(read_json(path)); }

namespace detail {

inline std::vector<std::string> point_header(const std::vector<std::string>& names) {
  std::vector<std::string> h{"iteration"};
  for (std::size_t m = 0; m < names.size(); ++m) h.push_back("lambda_" + std::to_string(m));
  for (const auto& n : names) h.push_back("value_" + n);
  for (const auto& n : names) h.push_back("se_" + n);
  return h;
}

inline std::vector<std::string> point_cells(std::size_t iteration, const WeightVector& lambda, const std::vector<double>& values,
                                            const std::vector<double>& ses) {
  std::vector<std::string> r{std::to_string(iteration)};
  for (double v : lambda.values()) r.push_back(csv::format_double(v));
  for (double v : values) r.push_back(csv::format_double(v));
  for (double v : ses) r.push_back(csv::format_double(v));
  return r;
}

inline std::size_t objectives_in(const csv::Table& t) {
  return static_cast<std::size_t>(std::count_if(t.header.begin(), t.header.end(), [](const std::string& h) { return h.rfind("lambda_", 0) == 0; }));
}

}  // namespace detail

inline void write_frontier_csv(const Frontier& f, const std::string& path) {
  csv::Writer w(path);
  auto h = detail::point_header(f.metric_names);
  h.push_back("kind");
  w.row(h);
  for (const auto& p : f.points) {
    auto r = detail::point_cells(p.iteration, p.lambda, p.values, p.ses);
    r.push_back(p.kind);
    w.row(r);
  }
}

// Points from a frontier or trace CSV (trees are not stored there).
inline std::vector<EvaluatedPoint> read_points_csv(const std::string& path) {
  const auto t = csv::read(path);
  const std::size_t K = detail::objectives_in(t);
  if (K == 0) fail_validation(path, ": no lambda_ columns");
  std::vector<EvaluatedPoint> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    EvaluatedPoint p;
    const std::string where = path + " row " + std::to_string(r + 1);
    p.iteration = static_cast<std::size_t>(csv::to_long(row.at(t.column("iteration")), where));
    std::vector<double> lam;
    for (std::size_t m = 0; m < K; ++m) lam.push_back(csv::to_double(row.at(t.column("lambda_" + std::to_string(m))), where));
    p.lambda = WeightVector(lam);
    std::size_t first_value = t.column("lambda_" + std::to_string(K - 1)) + 1;
    if (t.header.at(first_value) == "source") ++first_value;
    for (std::size_t m = 0; m < K; ++m) p.values.push_back(csv::to_double(row.at(first_value + m), where));
    for (std::size_t m = 0; m < K; ++m) p.ses.push_back(csv::to_double(row.at(first_value + K + m), where));
    if (auto it = std::find(t.header.begin(), t.header.end(), "kind"); it != t.header.end())
      p.kind = row.at(static_cast<std::size_t>(it - t.header.begin()));
    out.push_back(std::move(p));
  }
  return out;
}

// --- trace -----------------------------------------------------------------

inline void write_trace_csv(const RunTrace& trace, const std::vector<std::string>& names, const std::string& path) {
  csv::Writer w(path);
  auto h = detail::point_header(names);
  for (const char* c : {"source", "fit_seconds", "bootstrap_seconds", "acquisition_seconds", "acquisition_value", "hypervolume"}) h.push_back(c);
  w.row(h);
  for (const auto& r : trace.records) {
    auto cells = detail::point_cells(r.iteration, r.lambda, r.values, r.ses);
    cells.push_back(r.source);
    for (double v : {r.fit_seconds, r.bootstrap_seconds, r.acquisition_seconds, r.acquisition_value, r.hypervolume})
      cells.push_back(csv::format_double(v));
    w.row(cells);
  }
}

inline RunTrace read_trace_csv(const std::string& path) {
  const auto pts = read_points_csv(path);
  const auto t = csv::read(path);
  RunTrace trace;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 1);
    TraceRecord rec;
    rec.iteration = pts[r].iteration;
    rec.lambda = pts[r].lambda;
    rec.values = pts[r].values;
    rec.ses = pts[r].ses;
    rec.source = row.at(t.column("source"));
    rec.fit_seconds = csv::to_double(row.at(t.column("fit_seconds")), where);
    rec.bootstrap_seconds = csv::to_double(row.at(t.column("bootstrap_seconds")), where);
    rec.acquisition_seconds = csv::to_double(row.at(t.column("acquisition_seconds")), where);
    rec.acquisition_value = csv::to_double(row.at(t.column("acquisition_value")), where);
    rec.hypervolume = csv::to_double(row.at(t.column("hypervolume")), where);
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

// V_y against lambda for every evaluation, sorted by lambda.
inline void write_value_curve_csv(const std::vector<EvaluatedPoint>& evals, const std::vector<std::string>& names, const std::string& path) {
  std::vector<const EvaluatedPoint*> order;
  for (const auto& e : evals) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [](const EvaluatedPoint* a, const EvaluatedPoint* b) {
    return a->lambda.values() < b->lambda.values();
  });
  csv::Writer w(path);
  w.row(detail::point_header(names));
  for (const auto* e : order) w.row(detail::point_cells(e->iteration, e->lambda, e->values, e->ses));
}

// --- final report ----------------------------------------------------------

inline json final_report_to_json(const FinalReport& r, const std::vector<std::string>& feature_names) {
  return {{"lambda", r.lambda.values()},
          {"fitter", to_string(r.tree_config.kind)},
          {"depth", r.tree_config.depth},
          {"metrics", r.metric_names},
          {"n_train", r.train_rows.size()},
          {"n_test", r.test_rows.size()},
          {"train_values", r.train_values},
          {"test_values", r.test_values},
          {"train_weighted", r.train_weighted},
          {"test_weighted", r.test_weighted},
          {"fit_seconds", r.fit_seconds},
          {"tree", tree_to_json(r.tree)},
          {"tree_text", export_tree(r.tree, feature_names, TreeFormat::text)},
          {"warnings", r.warnings}};
}

struct ReportSummary {
  WeightVector lambda;
  std::string fitter;
  std::size_t depth = 0;
  std::vector<std::string> metrics;
  std::vector<double> train_values, test_values;
  double train_weighted = 0.0, test_weighted = 0.0, fit_seconds = 0.0;
  PolicyTree tree;
};

inline ReportSummary read_final_report(const std::string& path) {
  const json j = read_json(path);
  ReportSummary s;
  try {
    s.lambda = WeightVector(j.at("lambda").get<std::vector<double>>());
    s.fitter = j.at("fitter").get<std::string>();
    s.depth = j.at("depth").get<std::size_t>();
    s.metrics = j.at("metrics").get<std::vector<std::string>>();
    s.train_values = j.at("train_values").get<std::vector<double>>();
    s.test_values = j.at("test_values").get<std::vector<double>>();
    s.train_weighted = j.at("train_weighted").get<double>();
    s.test_weighted = j.at("test_weighted").get<double>();
    s.fit_seconds = j.at("fit_seconds").get<double>();
    s.tree = tree_from_json(j.at("tree"));
  } catch (const json::exception& e) {
    fail_validation(path, ": ", e.what());
  }
  return s;
}

inline PolicyTree read_tree_json(const std::string& path) {
  try {
    return tree_from_json(read_json(path));
  } catch (const json::exception& e) {
    fail_validation(path, ": ", e.what());
  }
}

// --- sweep report ----------------------------------------------------------

struct TraceSummary {
  std::string name;
  std::size_t iterations = 0;
  double final_hypervolume = 0.0;
  double mean_fit_seconds = 0.0;
  double mean_bootstrap_seconds = 0.0;
  double mean_acquisition_seconds = 0.0;
  double first_quartile_acquisition = 0.0;
  double last_quartile_acquisition = 0.0;
  double total_seconds = 0.0;
};

inline TraceSummary summarize(const RunTrace& t, std::string name) {
  TraceSummary s;
  s.name = std::move(name);
  s.iterations = t.records.size();
  if (t.records.empty()) return s;
  s.final_hypervolume = t.records.back().hypervolume;
  const double n = static_cast<double>(t.records.size());
  for (const auto& r : t.records) {
    s.mean_fit_seconds += r.fit_seconds / n;
    s.mean_bootstrap_seconds += r.bootstrap_seconds / n;
    s.mean_acquisition_seconds += r.acquisition_seconds / n;
    s.total_seconds += r.total_seconds();
  }
  const std::size_t q = std::max<std::size_t>(1, t.records.size() / 4);
  for (std::size_t i = 0; i < q; ++i) {
    s.first_quartile_acquisition += t.records[i].acquisition_seconds / static_cast<double>(q);
    s.last_quartile_acquisition += t.records[t.records.size() - 1 - i].acquisition_seconds / static_cast<double>(q);
  }
  return s;
}

inline void write_summary_csv(const std::vector<TraceSummary>& rows, const std::string& path) {
  csv::Writer w(path);
  w.row("run", "iterations", "final_hypervolume", "mean_fit_seconds", "mean_bootstrap_seconds", "mean_acquisition_seconds",
        "first_quartile_acquisition_seconds", "last_quartile_acquisition_seconds", "total_seconds");
  for (const auto& s : rows)
    w.row(s.name, std::to_string(s.iterations), csv::format_double(s.final_hypervolume), csv::format_double(s.mean_fit_seconds),
          csv::format_double(s.mean_bootstrap_seconds), csv::format_double(s.mean_acquisition_seconds),
          csv::format_double(s.first_quartile_acquisition), csv::format_double(s.last_quartile_acquisition),
          csv::format_double(s.total_seconds));
}

}  // namespace mopol::io
