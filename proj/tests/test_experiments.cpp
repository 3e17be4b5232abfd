#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "treecal/experiments.hpp"

namespace {

using namespace treecal;

SweepConfig tiny_sweep() {
  SweepConfig c;
  c.n_train = 20000;
  c.n_test = 5000;
  c.betas = {0.05, 0.1};
  c.mtry_values = {1, 5, 10};
  c.n_trees = 5;
  c.n_mc = 20000;
  c.seed = 3;
  return c;
}

std::string csv(const ResultTable& t) {
  std::ostringstream os;
  write_result_csv(os, t);
  write_metadata(os, t);
  return os.str();
}

TEST(RunReplicates, ConstantMetricHasZeroSd) {
  const ExperimentFn op = [](std::uint64_t) {
    ResultTable t;
    t.add({"x", std::nullopt, std::nullopt, std::nullopt, std::nullopt, "m", 4.5});
    return t;
  };
  const auto out = run_replicates(op, 5, 100);
  ASSERT_EQ(out.rows.size(), 7u);
  EXPECT_EQ(out.select("m_mean").at(0).value, 4.5);
  EXPECT_EQ(out.select("m_sd").at(0).value, 0.0);
  for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(out.rows[r].replicate, r);
  EXPECT_FALSE(out.select("m_sd").at(0).replicate.has_value());
}

TEST(RunReplicates, MeanAndSampleSd) {
  const ExperimentFn op = [](std::uint64_t seed) {
    ResultTable t;
    t.add({"x", 0.1, 2, std::nullopt, std::nullopt, "m", seed == 10 ? 1.0 : 3.0});
    return t;
  };
  const auto out = run_replicates(op, 2, 10);
  EXPECT_DOUBLE_EQ(out.select("m_mean").at(0).value, 2.0);
  EXPECT_DOUBLE_EQ(out.select("m_sd").at(0).value, std::sqrt(2.0));
  EXPECT_EQ(out.select("m_mean").at(0).beta, 0.1);
}

TEST(RunReplicates, FailureReportsSeed) {
  const ExperimentFn op = [](std::uint64_t seed) -> ResultTable {
    if (seed == 42) throw std::runtime_error("boom");
    return {};
  };
  try {
    run_replicates(op, 5, 40, 2);
    FAIL();
  } catch (const replicate_error& e) {
    EXPECT_EQ(e.seed(), 42u);
    EXPECT_EQ(e.index(), 2u);
    EXPECT_NE(std::string(e.what()).find("seed 42"), std::string::npos);
  }
  EXPECT_THROW(run_replicates(op, 1, 0), domain_error);
}

TEST(PrevalenceSweep, RowContractAndDeterminism) {
  const auto cfg = tiny_sweep();
  const auto a = prevalence_sweep(cfg, 1);
  ASSERT_EQ(a.rows.size(), cfg.betas.size() * cfg.mtry_values.size() + 1);
  EXPECT_EQ(a.select("prevalence_estimate").size(), 6u);
  ASSERT_EQ(a.select("true_prevalence").size(), 1u);
  EXPECT_NEAR(a.select("true_prevalence")[0].value, 0.0208, 0.002);
  for (const auto& r : a.select("prevalence_estimate")) {
    EXPECT_GT(r.value, 0.0);
    EXPECT_LT(r.value, 0.1);
  }
  EXPECT_EQ(csv(a), csv(prevalence_sweep(cfg, 1)));
  EXPECT_EQ(csv(a), csv(prevalence_sweep(cfg, 3)));
}

TEST(PrevalenceSweep, UnitRateEstimateIsRawMeanPrediction) {
  auto cfg = tiny_sweep();
  cfg.betas = {1.0};
  cfg.mtry_values = {10};
  const auto t = prevalence_sweep(cfg);
  const auto raw = t.lookup("beta=1.mtry=10.uncalibrated_mean");
  ASSERT_TRUE(raw.has_value());
  double v;
  ASSERT_TRUE(parse_double(*raw, v));
  EXPECT_NEAR(t.select("prevalence_estimate").at(0).value, v, 1e-15);
  EXPECT_EQ(t.lookup("beta=1.realized_beta"), "1");
}

TEST(PrevalenceSweep, ValidationListsFields) {
  auto cfg = tiny_sweep();
  cfg.betas = {0.0, 0.5};
  cfg.mtry_values = {11};
  cfg.n_trees = 0;
  try {
    prevalence_sweep(cfg);
    FAIL();
  } catch (const config_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("betas"), std::string::npos);
    EXPECT_NE(msg.find("mtry_values"), std::string::npos);
    EXPECT_NE(msg.find("n_trees"), std::string::npos);
  }
}

TEST(QqExperiment, RowContract) {
  auto cfg = tiny_sweep();
  cfg.betas = {0.03};
  cfg.mtry_values = {2, 10};
  const auto t = qq_experiment(cfg);
  ASSERT_EQ(t.rows.size(), 2 * 2 * qq_levels + 12 + 6);
  const auto min_pre = t.select("min_pre");
  const auto max_post = t.select("max_post");
  ASSERT_EQ(min_pre.size(), 2u);
  ASSERT_EQ(max_post.size(), 2u);
  // level 0 and level 1 quantiles are the extremes
  const auto q0 = t.select(qq_metric("pre", 0));
  const auto q1 = t.select(qq_metric("post", qq_levels - 1));
  ASSERT_EQ(q0.size(), 2u);
  EXPECT_EQ(q0[0].value, min_pre[0].value);
  EXPECT_EQ(q1[1].value, max_post[1].value);
  EXPECT_EQ(q0[1].mtry, 10u);
  const auto ratio = t.select("ratio_max_post");
  ASSERT_EQ(ratio.size(), 1u);
  EXPECT_DOUBLE_EQ(ratio[0].value, max_post[1].value / max_post[0].value);
  EXPECT_EQ(qq_metric("pre", 999), "quantile_pre@1.000000");
}

TEST(QqExperiment, RequiresTwoMtryAndOneRate) {
  auto cfg = tiny_sweep();
  EXPECT_THROW(qq_experiment(cfg), config_error);
}

TEST(TreeBiasStudy, RowContractAndDeterminism) {
  BiasStudyConfig cfg;
  cfg.prevalence_targets = {0.5, 0.1};
  cfg.n_train = 3000;
  cfg.n_test = 3000;
  cfg.n_replicates = 3;
  cfg.n_mc = 20000;
  cfg.k_tolerance = 0.01;
  const auto a = tree_bias_study(cfg, 1);
  ASSERT_EQ(a.rows.size(), 2 * (3 + 2));
  EXPECT_EQ(a.select("ratio").size(), 6u);
  EXPECT_EQ(a.select("ratio_mean").size(), 2u);
  EXPECT_EQ(a.select("ratio_sd").size(), 2u);
  EXPECT_EQ(a.select("ratio_mean")[1].prevalence_level, 0.1);
  EXPECT_TRUE(a.lookup("level=0.1.k").has_value());
  EXPECT_EQ(csv(a), csv(tree_bias_study(cfg, 2)));
}

TEST(TreeBiasStudy, MemorisedDeterministicLabelsGiveUnitRatio) {
  auto data = generate_dataset(5000, 1.0, 17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data.labels[i] = (*data.true_probs)[i] > 0.5 ? 1 : 0;
    (*data.true_probs)[i] = data.labels[i];
  }
  const Tree t = fit_tree(data, 10, 1);
  EXPECT_DOUBLE_EQ(prediction_ratio(t, data), 1.0);
}

TEST(TreeBiasStudy, ValidationListsFields) {
  BiasStudyConfig cfg;
  cfg.n_replicates = 1;
  cfg.prevalence_targets = {1.5};
  try {
    tree_bias_study(cfg);
    FAIL();
  } catch (const config_error& e) {
    EXPECT_NE(std::string(e.what()).find("n_replicates"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("prevalence_targets"), std::string::npos);
  }
}

TEST(ResultCsv, HeaderAndEmptyFactorColumns) {
  ResultTable t;
  t.add({"sweep", 0.025, 3, std::nullopt, std::nullopt, "prevalence_estimate", 0.0211});
  t.add({"bias", std::nullopt, std::nullopt, 0.498, 7, "ratio", 1.001});
  std::ostringstream os;
  write_result_csv(os, t);
  EXPECT_EQ(os.str(),
            "experiment,beta,mtry,prevalence_level,replicate,metric,value\n"
            "sweep,0.025,3,,,prevalence_estimate,0.0211\n"
            "bias,,,0.498,7,ratio,1.001\n");
}

TEST(Stats, SpearmanAndQuantiles) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(stats::spearman(x, std::vector<double>{2, 4, 8, 16, 32}), 1.0);
  EXPECT_DOUBLE_EQ(stats::spearman(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0);
  EXPECT_NEAR(stats::spearman(x, std::vector<double>{1, 3, 2, 4, 4}), 0.8720815992723809, 1e-12);
  const std::vector<double> s{0, 1, 2, 10};
  EXPECT_DOUBLE_EQ(stats::quantile_sorted(s, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(stats::quantile_sorted(s, 1.0), 10.0);
  EXPECT_DOUBLE_EQ(stats::quantile_sorted(s, 0.5), 1.5);
  EXPECT_DOUBLE_EQ(stats::quantile_sorted(s, 0.9), 2 + 0.7 * 8);
}

} // namespace
