#include <gtest/gtest.h>

#include "support.hpp"

using namespace mopol;
using namespace testing_support;

namespace {

MopolConfig small_config(std::size_t iterations, std::uint64_t seed = 1) {
  MopolConfig c;
  c.tree.kind = FitterKind::greedy;
  c.replicates = 10;
  c.budget.iterations = iterations;
  c.acquisition.mc_samples = 32;
  c.acquisition.candidate_grid = 32;
  c.acquisition.refine_steps = 5;
  c.seed = seed;
  return c;
}

const synth::Sample& tradeoff_sample() {
  static const auto s = synth::generate(synth::tradeoff(300), 21);
  return s;
}

}  // namespace

TEST(Config, Validation) {
  MopolConfig c = small_config(5);
  EXPECT_NO_THROW(c.validate(2));
  c.replicates = 1;
  EXPECT_THROW(c.validate(2), ValidationError);
  c = small_config(5);
  c.budget = {};
  EXPECT_THROW(c.validate(2), ValidationError);
  c.budget.seconds = -1.0;
  EXPECT_THROW(c.validate(2), ValidationError);
  EXPECT_EQ(parse_se_mode("alg1-literal"), SeMode::alg1_literal);
  EXPECT_THROW(parse_se_mode("jackknife"), ValidationError);
}

TEST(Bootstrap, ConstantScoresHaveZeroError) {
  Matrix X(30, 1);
  ScoreMatrix s{Tensor3(30, 2, 2)};
  for (std::size_t i = 0; i < 30; ++i) {
    X(i, 0) = static_cast<double>(i);
    s(i, 1, 0) = 1.0;
    s(i, 0, 1) = 2.0;
  }
  TreeFitConfig t;
  t.kind = FitterKind::greedy;
  for (double se : bootstrap_se(X, s, WeightVector({0.5, 0.5}), t, 20, SeMode::conventional, 3)) EXPECT_EQ(se, 0.0);
}

TEST(Bootstrap, LiteralModeIsConventionalOverRootB) {
  const auto& smp = tradeoff_sample();
  TreeFitConfig t;
  t.kind = FitterKind::greedy;
  const WeightVector lam({0.4, 0.6});
  const auto conv = bootstrap(smp.dataset.covariates, smp.scores, lam, t, 25, SeMode::conventional, 9, outcome_metrics(2));
  const auto lit = bootstrap(smp.dataset.covariates, smp.scores, lam, t, 25, SeMode::alg1_literal, 9, outcome_metrics(2));
  EXPECT_EQ(conv.values, lit.values);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_GT(conv.ses[k], 0.0);
    EXPECT_NEAR(lit.ses[k], conv.ses[k] / 5.0, 1e-12);
    // Independent recomputation from the replicate values.
    double mean = 0.0, ss = 0.0;
    for (const auto& v : conv.values) mean += v[k] / 25.0;
    for (const auto& v : conv.values) ss += (v[k] - mean) * (v[k] - mean);
    EXPECT_NEAR(conv.ses[k], std::sqrt(ss / 24.0), 1e-12);
  }
  EXPECT_THROW(bootstrap_se(smp.dataset.covariates, smp.scores, lam, t, 1, SeMode::conventional, 1), ValidationError);
}

TEST(RunMopol, InitOnlyRunMakesNoAcquisitionCalls) {
  const auto& smp = tradeoff_sample();
  const auto res = run_mopol(smp.scores, smp.dataset.covariates, small_config(6));
  EXPECT_EQ(res.evaluations.size(), 6u);
  EXPECT_EQ(res.acquisition_calls, 0u);
  EXPECT_FALSE(res.partial);
  const auto init = sobol_init(SearchSpace(2), derive_seed(1, 0x1417ULL));
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(res.evaluations[i].lambda, init[i]);
    EXPECT_EQ(res.trace.records[i].source, "sobol");
  }
}

TEST(RunMopol, TraceIsConsistentAndHypervolumeMonotone) {
  const auto& smp = tradeoff_sample();
  std::size_t observed = 0;
  const auto cfg = small_config(12);
  const auto res = run_mopol(smp.scores, smp.dataset.covariates, cfg, [&](const TraceRecord&) { ++observed; });
  ASSERT_EQ(res.trace.records.size(), 12u);
  EXPECT_EQ(observed, 12u);
  EXPECT_EQ(res.acquisition_calls, 6u);
  for (std::size_t i = 1; i < 12; ++i) EXPECT_GE(res.trace.records[i].hypervolume, res.trace.records[i - 1].hypervolume);
  EXPECT_DOUBLE_EQ(res.trace.records.back().hypervolume, res.hypervolume);

  const auto metrics = outcome_metrics(2);
  for (const auto& e : res.evaluations) {
    ASSERT_TRUE(e.tree.has_value());
    // Stored values are the stored tree's values on the full sample, and
    // the stored tree is what a standalone fit at that weight returns.
    EXPECT_EQ(metric_values(*e.tree, smp.dataset.covariates, smp.scores, metrics), e.values);
    EXPECT_EQ(tree_to_json(fit_tree(smp.dataset.covariates, smp.scores, e.lambda, cfg.tree)), tree_to_json(*e.tree));
  }
  const auto front = res.pareto.value_vectors();
  for (const auto& a : front)
    for (const auto& e : res.evaluations) EXPECT_FALSE(dominates(e.values, a));
}

TEST(RunMopol, SameSeedSameResult) {
  const auto& smp = tradeoff_sample();
  const auto a = run_mopol(smp.scores, smp.dataset.covariates, small_config(8, 4));
  const auto b = run_mopol(smp.scores, smp.dataset.covariates, small_config(8, 4));
  ASSERT_EQ(a.evaluations.size(), b.evaluations.size());
  for (std::size_t i = 0; i < a.evaluations.size(); ++i) {
    EXPECT_EQ(a.evaluations[i].lambda, b.evaluations[i].lambda);
    EXPECT_EQ(a.evaluations[i].values, b.evaluations[i].values);
    EXPECT_EQ(a.evaluations[i].ses, b.evaluations[i].ses);
  }
}

TEST(RunMopol, BatchProposalsRespectBudget) {
  const auto& smp = tradeoff_sample();
  auto cfg = small_config(9);
  cfg.acquisition.q = 2;
  const auto res = run_mopol(smp.scores, smp.dataset.covariates, cfg);
  EXPECT_EQ(res.evaluations.size(), 9u);
  EXPECT_EQ(res.acquisition_calls, 2u);
}

TEST(RunMopol, PartialWhenBudgetEndsDuringInit) {
  const auto& smp = tradeoff_sample();
  const auto res = run_mopol(smp.scores, smp.dataset.covariates, small_config(3));
  EXPECT_TRUE(res.partial);
  EXPECT_EQ(res.evaluations.size(), 3u);
}

TEST(RunMopol, SecondsBudgetStops) {
  const auto& smp = tradeoff_sample();
  auto cfg = small_config(0);
  cfg.budget = {};
  cfg.budget.seconds = 0.5;
  Stopwatch sw;
  const auto res = run_mopol(smp.scores, smp.dataset.covariates, cfg);
  EXPECT_GE(res.evaluations.size(), 1u);
  EXPECT_LT(sw.seconds(), 10.0);
}

TEST(RunMopol, LeafCountObjective) {
  const auto& smp = tradeoff_sample();
  auto cfg = small_config(6);
  cfg.metrics = {ObjectiveMetric::for_outcome(0), ObjectiveMetric::negative_leaf_count()};
  const auto res = run_mopol(smp.scores, smp.dataset.covariates, cfg);
  EXPECT_EQ(res.metric_names, (std::vector<std::string>{"outcome_0", "neg_leaf_count"}));
  for (const auto& e : res.evaluations) EXPECT_EQ(e.values[1], -static_cast<double>(e.tree->leaf_count()));
}

TEST(SplitRows, ShuffledAndContiguous) {
  const auto [tr, te] = split_rows(10, 0.5, 3, SplitMode::shuffled);
  EXPECT_EQ(tr.size(), 5u);
  EXPECT_TRUE(std::is_sorted(tr.begin(), tr.end()));
  std::set<std::size_t> all(tr.begin(), tr.end());
  all.insert(te.begin(), te.end());
  EXPECT_EQ(all.size(), 10u);
  const auto [ctr, cte] = split_rows(10, 0.3, 3, SplitMode::contiguous);
  EXPECT_EQ(ctr, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(cte.front(), 3u);
  EXPECT_THROW(split_rows(10, 1.5, 0, SplitMode::shuffled), ValidationError);
}

TEST(FitFinal, DuplicatedHalvesGiveEqualTrainAndTest) {
  const auto base = synth::generate(synth::tradeoff(100), 2);
  std::vector<std::size_t> twice;
  for (int r = 0; r < 2; ++r)
    for (std::size_t i = 0; i < 100; ++i) twice.push_back(i);
  const Matrix X = take_rows(base.dataset.covariates, twice);
  const ScoreMatrix S = take_rows(base.scores, twice);
  TreeFitConfig t;
  t.kind = FitterKind::optimal;
  FinalOptions opt;
  opt.split = SplitMode::contiguous;
  const auto rep = fit_final(S, X, WeightVector({0.5, 0.5}), t, opt);
  EXPECT_EQ(rep.train_values, rep.test_values);
  EXPECT_EQ(rep.train_weighted, rep.test_weighted);
  EXPECT_EQ(rep.train_rows.size(), 100u);
}

TEST(FitFinal, DeeperTreeNeverWorseInSample) {
  const auto& smp = tradeoff_sample();
  TreeFitConfig t2, t3;
  t2.kind = t3.kind = FitterKind::optimal;
  t3.depth = 3;
  const WeightVector lam({0.3, 0.7});
  const auto r2 = fit_final(smp.scores, smp.dataset.covariates, lam, t2);
  const auto r3 = fit_final(smp.scores, smp.dataset.covariates, lam, t3);
  EXPECT_GE(r3.train_weighted, r2.train_weighted - 1e-12);
  EXPECT_THROW(fit_final(smp.scores, smp.dataset.covariates, WeightVector({1.0}), t2), ValidationError);
}

TEST(FitFinal, WarnsWhenTrainMissesAnArm) {
  const auto& smp = tradeoff_sample();
  std::vector<int> arms(300, 0);
  for (std::size_t i = 150; i < 300; ++i) arms[i] = 1;
  FinalOptions opt;
  opt.split = SplitMode::contiguous;
  opt.treatments = arms;
  std::vector<std::string> seen;
  const auto saved = warning_sink();
  warning_sink() = [&](const std::string& m) { seen.push_back(m); };
  TreeFitConfig t;
  t.kind = FitterKind::greedy;
  const auto rep = fit_final(smp.scores, smp.dataset.covariates, WeightVector({0.5, 0.5}), t, opt);
  warning_sink() = saved;
  ASSERT_EQ(rep.warnings.size(), 1u);
  EXPECT_NE(rep.warnings[0].find("treatment 1"), std::string::npos);
  EXPECT_EQ(seen.size(), 1u);
}

TEST(EvaluateRules, ConstantTreeGivesColumnMeansAndOptimalDominatesHandpicked) {
  const auto& smp = tradeoff_sample();
  const auto v = evaluate_rules(PolicyTree::leaf(1), smp.scores, smp.dataset.covariates);
  for (std::size_t y = 0; y < 2; ++y) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 300; ++i) mean += smp.scores(i, 1, y);
    EXPECT_NEAR(v[y], mean / 300.0, 1e-12);
  }
  const WeightVector lam({0.5, 0.5});
  const auto hand = PolicyTree::split(1, 0.0, PolicyTree::leaf(1), PolicyTree::leaf(0));
  TreeFitConfig t;
  t.kind = FitterKind::optimal;
  const auto best = fit_tree(smp.dataset.covariates, smp.scores, lam, t);
  EXPECT_GE(value_weighted(best, smp.dataset.covariates, smp.scores, lam),
            weighted_sum(lam, evaluate_rules(hand, smp.scores, smp.dataset.covariates)));
}
