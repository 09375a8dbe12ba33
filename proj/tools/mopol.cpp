// mopol: command-line front end (synth | scores | frontier | final | eval | report).

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mopol/mopol.hpp"

namespace fs = std::filesystem;
using namespace mopol;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitPartial = 3;

struct DataFlags {
  std::string data, schema, scores;
  std::vector<std::string> nuisance;
  double floor = 1e-3;

  void attach(CLI::App* app, bool need_scores = true) {
    app->add_option("--data", data, "dataset CSV")->required();
    app->add_option("--schema", schema, "schema JSON mapping column -> role")->required();
    if (!need_scores) return;
    auto* s = app->add_option("--scores", scores, "score CSV (row,treatment,outcome,score)");
    auto* nu = app->add_option("--nuisance", nuisance, "mhat CSV and ehat CSV")->expected(2);
    s->excludes(nu);
    app->add_option("--propensity-floor", floor, "reject propensities below this");
  }
};

struct Loaded {
  Dataset data;
  ScoreMatrix scores;
};

Loaded load_inputs(const DataFlags& f) {
  Loaded in;
  in.data = load_dataset(f.data, load_schema(f.schema));
  if (!f.scores.empty()) {
    in.scores = read_scores(f.scores);
  } else if (!f.nuisance.empty()) {
    const auto nu = read_nuisance(f.nuisance.at(0), f.nuisance.at(1));
    in.scores = aipw_scores(in.data, nu, f.floor);
  } else {
    fail_validation("give either --scores or --nuisance MHAT EHAT");
  }
  if (in.scores.units() != in.data.size())
    fail_validation("scores cover ", in.scores.units(), " rows but the dataset has ", in.data.size());
  if (in.scores.treatments() != in.data.num_treatments)
    fail_validation("scores have ", in.scores.treatments(), " treatments, dataset ", in.data.num_treatments);
  return in;
}

// "0.3" with two objectives means (0.3, 0.7); otherwise all components.
WeightVector parse_lambda(const std::string& s, std::size_t objectives) {
  std::vector<double> w;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(',', start);
    w.push_back(csv::to_double(csv::trim(s.substr(start, end == std::string::npos ? std::string::npos : end - start)), "--lambda"));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  if (w.size() + 1 == objectives) {
    double sum = 0.0;
    for (double v : w) sum += v;
    w.push_back(1.0 - sum);
  }
  if (w.size() != objectives) fail_validation("--lambda has ", w.size(), " components for ", objectives, " objectives");
  return WeightVector(w);
}

SplitMode parse_split_mode(const std::string& s) {
  if (s == "shuffled") return SplitMode::shuffled;
  if (s == "contiguous") return SplitMode::contiguous;
  fail_validation("--split-mode '", s, "' is not shuffled|contiguous");
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy trees over the Pareto frontier of outcome weights"};
  app.require_subcommand(1);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "simulate a dataset with nuisance and oracle score files");
  std::string spec_path, preset;
  std::size_t preset_n = 2000;
  std::uint64_t seed = 0;
  std::string out;
  auto* spec_opt = synth_cmd->add_option("--spec", spec_path, "DGP spec JSON");
  synth_cmd->add_option("--preset", preset, "built-in DGP: tradeoff | null")->excludes(spec_opt)->check(CLI::IsMember({"tradeoff", "null"}));
  synth_cmd->add_option("-n,--units", preset_n, "rows for a preset");
  synth_cmd->add_option("--seed", seed);
  synth_cmd->add_option("--out", out)->required();

  // scores
  auto* scores_cmd = app.add_subcommand("scores", "form AIPW scores from dataset and nuisance files");
  DataFlags score_flags;
  score_flags.attach(scores_cmd, false);
  std::vector<std::string> nuisance_files;
  scores_cmd->add_option("--nuisance", nuisance_files, "mhat CSV and ehat CSV")->expected(2)->required();
  scores_cmd->add_option("--propensity-floor", score_flags.floor);
  scores_cmd->add_option("--out", out)->required();

  // frontier
  auto* frontier_cmd = app.add_subcommand("frontier", "map the Pareto frontier over outcome weights");
  DataFlags frontier_flags;
  frontier_flags.attach(frontier_cmd);
  std::string config_path, fitter, se_mode;
  std::optional<std::size_t> depth, replicates, budget_iters;
  std::optional<double> budget_seconds;
  std::optional<std::uint64_t> seed_override;
  frontier_cmd->add_option("--config", config_path, "run config JSON");
  frontier_cmd->add_option("--depth", depth);
  frontier_cmd->add_option("--fitter", fitter)->check(CLI::IsMember({"greedy", "hybrid", "optimal"}));
  frontier_cmd->add_option("--replicates", replicates);
  auto* bi = frontier_cmd->add_option("--budget-iters", budget_iters);
  frontier_cmd->add_option("--budget-seconds", budget_seconds)->excludes(bi);
  frontier_cmd->add_option("--seed", seed_override);
  frontier_cmd->add_option("--se-mode", se_mode)->check(CLI::IsMember({"conventional", "alg1-literal"}));
  frontier_cmd->add_option("--out", out)->required();

  // final
  auto* final_cmd = app.add_subcommand("final", "fit the chosen-weight tree on a train split and report test values");
  DataFlags final_flags;
  final_flags.attach(final_cmd);
  std::string lambda_text, split_mode = "shuffled";
  double split = 0.5;
  std::size_t final_depth = 2;
  std::string final_fitter = "greedy";
  final_cmd->add_option("--lambda", lambda_text, "weights, e.g. 0.5 or 0.2,0.3,0.5")->required();
  final_cmd->add_option("--depth", final_depth);
  final_cmd->add_option("--fitter", final_fitter)->check(CLI::IsMember({"greedy", "hybrid", "optimal"}));
  final_cmd->add_option("--split", split, "train fraction in (0,1)");
  final_cmd->add_option("--split-mode", split_mode)->check(CLI::IsMember({"shuffled", "contiguous"}));
  final_cmd->add_option("--seed", seed);
  final_cmd->add_option("--out", out)->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "value a given tree without fitting");
  DataFlags eval_flags;
  eval_flags.attach(eval_cmd);
  std::string tree_path, partition = "all";
  eval_cmd->add_option("--tree", tree_path, "tree JSON, or tree text when the name ends in .txt")->required();
  eval_cmd->add_option("--partition", partition)->check(CLI::IsMember({"all", "train", "test"}));
  eval_cmd->add_option("--split", split);
  eval_cmd->add_option("--split-mode", split_mode)->check(CLI::IsMember({"shuffled", "contiguous"}));
  eval_cmd->add_option("--seed", seed);
  eval_cmd->add_option("--out", out, "write eval.json here instead of stdout");

  // report
  auto* report_cmd = app.add_subcommand("report", "summarize trace CSVs from a sweep");
  std::vector<std::string> runs;
  report_cmd->add_option("runs", runs, "run directories (containing trace.csv) or a sweep root")->required();
  report_cmd->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      synth::DgpSpec spec;
      if (!spec_path.empty())
        spec = synth::load_spec(spec_path);
      else if (preset == "null")
        spec = synth::null_effect(preset_n);
      else if (preset == "tradeoff")
        spec = synth::tradeoff(preset_n);
      else
        fail_validation("give --spec or --preset");
      io::ensure_dir(out);
      const auto sample = synth::generate(spec, seed);
      write_dataset(sample.dataset, path_in(out, "data.csv"), path_in(out, "schema.json"));
      write_nuisance(sample.nuisance, path_in(out, "mhat.csv"), path_in(out, "ehat.csv"));
      write_scores(sample.scores, path_in(out, "scores.csv"));
      return 0;
    }

    if (*scores_cmd) {
      const auto data = load_dataset(score_flags.data, load_schema(score_flags.schema));
      const auto nu = read_nuisance(nuisance_files.at(0), nuisance_files.at(1));
      write_scores(aipw_scores(data, nu, score_flags.floor), out);
      return 0;
    }

    if (*frontier_cmd) {
      MopolConfig cfg = config_path.empty() ? MopolConfig{} : io::load_config(config_path);
      if (depth) cfg.tree.depth = *depth;
      if (!fitter.empty()) cfg.tree.kind = parse_fitter(fitter);
      if (replicates) cfg.replicates = *replicates;
      if (budget_iters) cfg.budget = {.iterations = *budget_iters, .seconds = std::nullopt};
      if (budget_seconds) cfg.budget = {.iterations = std::nullopt, .seconds = *budget_seconds};
      if (seed_override) cfg.seed = *seed_override;
      if (!se_mode.empty()) cfg.se_mode = parse_se_mode(se_mode);
      const auto in = load_inputs(frontier_flags);
      cfg.validate(in.data.num_covariates());
      io::ensure_dir(out);
      io::write_text(path_in(out, "config.json"), io::dump(io::config_to_json(cfg)));
      const auto res = run_mopol(in.scores, in.data.covariates, cfg, [](const TraceRecord& r) {
        std::clog << "iter " << r.iteration << " lambda=";
        for (std::size_t m = 0; m < r.lambda.size(); ++m) std::clog << (m ? "," : "") << r.lambda[m];
        std::clog << " acq_value=" << r.acquisition_value << " acq_seconds=" << r.acquisition_seconds << " hv=" << r.hypervolume << '\n';
      });
      const auto frontier = io::frontier_of(res);
      io::write_frontier_json(frontier, path_in(out, "frontier.json"));
      io::write_frontier_csv(frontier, path_in(out, "frontier.csv"));
      io::write_trace_csv(res.trace, res.metric_names, path_in(out, "trace.csv"));
      io::write_value_curve_csv(res.evaluations, res.metric_names, path_in(out, "value_curve.csv"));
      if (res.partial) {
        std::cerr << "budget ended after " << res.evaluations.size() << " of " << res.init_points << " initialization points\n";
        return kExitPartial;
      }
      return 0;
    }

    if (*final_cmd) {
      const auto in = load_inputs(final_flags);
      TreeFitConfig tc;
      tc.kind = parse_fitter(final_fitter);
      tc.depth = final_depth;
      const auto lambda = parse_lambda(lambda_text, in.scores.outcomes());
      FinalOptions opt;
      opt.train_fraction = split;
      opt.seed = seed;
      opt.split = parse_split_mode(split_mode);
      opt.treatments = in.data.treatments;
      const auto rep = fit_final(in.scores, in.data.covariates, lambda, tc, opt);
      io::ensure_dir(out);
      io::write_text(path_in(out, "final_report.json"), io::dump(io::final_report_to_json(rep, in.data.covariate_names)));
      io::write_text(path_in(out, "tree.json"), io::dump(tree_to_json(rep.tree)));
      io::write_text(path_in(out, "tree.txt"), export_tree(rep.tree, in.data.covariate_names, TreeFormat::text));
      io::write_text(path_in(out, "tree.dot"), export_tree(rep.tree, in.data.covariate_names, TreeFormat::dot));
      return 0;
    }

    if (*eval_cmd) {
      const auto in = load_inputs(eval_flags);
      const PolicyTree tree = fs::path(tree_path).extension() == ".txt"
                                  ? parse_tree_text(io::read_text(tree_path), in.data.covariate_names)
                                  : io::read_tree_json(tree_path);
      Matrix X = in.data.covariates;
      ScoreMatrix S = in.scores;
      if (partition != "all") {
        const auto [train, test] = split_rows(X.rows(), split, seed, parse_split_mode(split_mode));
        const auto& rows = partition == "train" ? train : test;
        X = take_rows(X, rows);
        S = take_rows(S, rows);
      }
      const auto values = evaluate_rules(tree, S, X);
      nlohmann::json j{{"partition", partition}, {"rows", X.rows()}, {"values", values}};
      if (out.empty())
        std::cout << io::dump(j);
      else {
        io::ensure_dir(out);
        io::write_text(path_in(out, "eval.json"), io::dump(j));
      }
      return 0;
    }

    if (*report_cmd) {
      std::vector<fs::path> dirs;
      for (const auto& r : runs) {
        if (fs::exists(fs::path(r) / "trace.csv")) {
          dirs.emplace_back(r);
          continue;
        }
        if (!fs::is_directory(r)) fail_validation(r, " is neither a run directory nor a sweep root");
        for (const auto& e : fs::directory_iterator(r))
          if (e.is_directory() && fs::exists(e.path() / "trace.csv")) dirs.push_back(e.path());
      }
      std::sort(dirs.begin(), dirs.end());
      if (dirs.empty()) fail_validation("no trace.csv found under the given paths");
      std::vector<io::TraceSummary> rows;
      for (const auto& d : dirs) rows.push_back(io::summarize(io::read_trace_csv((d / "trace.csv").string()), d.filename().string()));
      io::write_summary_csv(rows, out);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
