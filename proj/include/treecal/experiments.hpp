#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "treecal/calibration.hpp"
#include "treecal/csv.hpp"
#include "treecal/dataset.hpp"
#include "treecal/error.hpp"
#include "treecal/forest.hpp"
#include "treecal/parallel.hpp"
#include "treecal/random.hpp"
#include "treecal/resampling.hpp"
#include "treecal/stats.hpp"
#include "treecal/synthetic_data.hpp"
#include "treecal/tree.hpp"

namespace treecal {

// Invalid experiment configuration. The message lists every offending field.
class config_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct ResultRow {
  std::string experiment;
  std::optional<double> beta;
  std::optional<std::size_t> mtry;
  std::optional<double> prevalence_level;
  std::optional<std::size_t> replicate;
  std::string metric;
  double value = 0.0;
};

// Long-format experiment output: one metric value per row. `metadata` holds
// the resolved configuration, derived seeds and auxiliary quantities needed
// to reproduce the table.
struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  void add(ResultRow row) { rows.push_back(std::move(row)); }
  void note(std::string key, std::string value) {
    metadata.emplace_back(std::move(key), std::move(value));
  }
  void append(const ResultTable& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    metadata.insert(metadata.end(), other.metadata.begin(), other.metadata.end());
  }

  // Rows whose metric name matches exactly.
  std::vector<ResultRow> select(const std::string& metric) const {
    std::vector<ResultRow> out;
    for (const auto& r : rows)
      if (r.metric == metric) out.push_back(r);
    return out;
  }

  std::optional<std::string> lookup(const std::string& key) const {
    for (const auto& [k, v] : metadata)
      if (k == key) return v;
    return std::nullopt;
  }
};

inline constexpr const char* result_csv_header =
    "experiment,beta,mtry,prevalence_level,replicate,metric,value";

inline void write_result_csv(std::ostream& os, const ResultTable& table) {
  os << result_csv_header << '\n';
  std::string line;
  for (const auto& r : table.rows) {
    line = r.experiment;
    line += ',';
    if (r.beta) line += format_double(*r.beta);
    line += ',';
    if (r.mtry) line += std::to_string(*r.mtry);
    line += ',';
    if (r.prevalence_level) line += format_double(*r.prevalence_level);
    line += ',';
    if (r.replicate) line += std::to_string(*r.replicate);
    line += ',';
    line += r.metric;
    line += ',';
    line += format_double(r.value);
    line += '\n';
    os << line;
  }
}

inline void write_metadata(std::ostream& os, const ResultTable& table) {
  for (const auto& [k, v] : table.metadata) os << k << " = " << v << '\n';
}

namespace detail {

inline std::string join_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

inline std::string join_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline void throw_if_problems(const char* what, const std::vector<std::string>& problems) {
  if (problems.empty()) return;
  std::string msg = std::string("invalid ") + what + " configuration:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw config_error(msg);
}

// Stream tags for seeds derived from an experiment's master seed.
enum : std::uint64_t {
  train_tag = 1,
  test_tag = 2,
  baseline_tag = 3,
  undersample_tag = 4,
  forest_tag = 5,
  k_solve_tag = 6,
  replicate_tag = 7,
  tree_tag = 8,
};

} // namespace detail

struct SweepConfig {
  std::size_t n_train = 200'000;
  std::size_t n_test = 200'000;
  double k = 1.5;
  std::vector<double> betas{0.025, 0.05, 0.075, 0.1};
  std::vector<std::size_t> mtry_values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t n_trees = 200;
  std::size_t n_mc = 1'000'000;
  std::uint64_t seed = 1;

  static SweepConfig paper_scale() {
    SweepConfig c;
    c.n_train = 1'000'000;
    c.n_test = 1'000'000;
    c.n_trees = 500;
    return c;
  }

  std::vector<std::string> problems() const {
    std::vector<std::string> p;
    if (n_train == 0) p.push_back("n_train: must be >= 1");
    if (n_test == 0) p.push_back("n_test: must be >= 1");
    if (!std::isfinite(k)) p.push_back("k: must be finite");
    if (betas.empty()) p.push_back("betas: must be non-empty");
    for (double b : betas)
      if (!(b > 0.0 && b <= 1.0)) p.push_back("betas: " + format_double(b) + " outside (0,1]");
    if (mtry_values.empty()) p.push_back("mtry_values: must be non-empty");
    for (auto m : mtry_values)
      if (m < 1 || m > dgp_features)
        p.push_back("mtry_values: " + std::to_string(m) + " outside [1,10]");
    if (n_trees == 0) p.push_back("n_trees: must be >= 1");
    if (n_mc == 0) p.push_back("n_mc: must be >= 1");
    return p;
  }
  void validate() const { detail::throw_if_problems("sweep", problems()); }

  std::vector<std::pair<std::string, std::string>> describe() const {
    return {{"n_train", std::to_string(n_train)},
            {"n_test", std::to_string(n_test)},
            {"k", format_double(k)},
            {"betas", detail::join_list(betas)},
            {"mtry_values", detail::join_list(mtry_values)},
            {"n_trees", std::to_string(n_trees)},
            {"n_mc", std::to_string(n_mc)},
            {"seed", std::to_string(seed)}};
  }
};

struct BiasStudyConfig {
  std::vector<double> prevalence_targets{0.498, 0.397, 0.305, 0.225, 0.160, 0.061, 0.021, 0.002};
  std::size_t n_train = 100'000;
  std::size_t n_test = 200'000;
  std::size_t n_replicates = 50;
  std::size_t n_mc = 1'000'000;
  // Root-finding tolerance on prevalence, relative to each target.
  double k_tolerance = 0.002;
  std::uint64_t seed = 1;

  static BiasStudyConfig paper_scale() {
    BiasStudyConfig c;
    c.n_test = 1'000'000;
    return c;
  }

  std::vector<std::string> problems() const {
    std::vector<std::string> p;
    if (prevalence_targets.empty()) p.push_back("prevalence_targets: must be non-empty");
    for (double t : prevalence_targets)
      if (!(t > 0.0 && t < 1.0))
        p.push_back("prevalence_targets: " + format_double(t) + " outside (0,1)");
    if (n_train == 0) p.push_back("n_train: must be >= 1");
    if (n_test == 0) p.push_back("n_test: must be >= 1");
    if (n_replicates < 2) p.push_back("n_replicates: must be >= 2");
    if (n_mc == 0) p.push_back("n_mc: must be >= 1");
    if (!(k_tolerance > 0.0)) p.push_back("k_tolerance: must be > 0");
    return p;
  }
  void validate() const { detail::throw_if_problems("bias", problems()); }

  std::vector<std::pair<std::string, std::string>> describe() const {
    return {{"prevalence_targets", detail::join_list(prevalence_targets)},
            {"n_train", std::to_string(n_train)},
            {"n_test", std::to_string(n_test)},
            {"n_replicates", std::to_string(n_replicates)},
            {"n_mc", std::to_string(n_mc)},
            {"k_tolerance", format_double(k_tolerance)},
            {"seed", std::to_string(seed)}};
  }
};

// Thrown when one replicate of run_replicates fails; carries its seed.
class replicate_error : public std::runtime_error {
public:
  replicate_error(std::size_t index, std::uint64_t seed, const std::string& what)
      : std::runtime_error("replicate " + std::to_string(index) + " (seed " +
                           std::to_string(seed) + ") failed: " + what),
        index_(index), seed_(seed) {}
  std::size_t index() const noexcept { return index_; }
  std::uint64_t seed() const noexcept { return seed_; }

private:
  std::size_t index_;
  std::uint64_t seed_;
};

using ExperimentFn = std::function<ResultTable(std::uint64_t seed)>;

// Runs `op` with seeds base_seed + 0 .. n-1, tags each row with its
// replicate index, then appends `<metric>_mean` and `<metric>_sd` rows for
// every (experiment, beta, mtry, prevalence_level, metric) group in order of
// first appearance.
inline ResultTable run_replicates(const ExperimentFn& op, std::size_t n, std::uint64_t base_seed,
                                  std::size_t threads = 1) {
  if (n < 2) throw domain_error("run_replicates: need n >= 2");
  std::vector<ResultTable> runs(n);
  parallel_for(n, threads, [&](std::size_t r) {
    const std::uint64_t seed = base_seed + r;
    try {
      runs[r] = op(seed);
    } catch (const std::exception& e) {
      throw replicate_error(r, seed, e.what());
    }
  });

  ResultTable out;
  struct Group {
    ResultRow key;
    std::vector<double> values;
  };
  std::vector<Group> groups;
  auto same_key = [](const ResultRow& a, const ResultRow& b) {
    return a.experiment == b.experiment && a.beta == b.beta && a.mtry == b.mtry &&
           a.prevalence_level == b.prevalence_level && a.metric == b.metric;
  };
  for (std::size_t r = 0; r < n; ++r) {
    for (auto row : runs[r].rows) {
      row.replicate = r;
      auto it = std::find_if(groups.begin(), groups.end(),
                             [&](const Group& g) { return same_key(g.key, row); });
      if (it == groups.end()) {
        groups.push_back({row, {}});
        it = groups.end() - 1;
      }
      it->values.push_back(row.value);
      out.add(std::move(row));
    }
    for (const auto& [k, v] : runs[r].metadata)
      out.note("replicate." + std::to_string(r) + "." + k, v);
  }
  for (const auto& g : groups) {
    ResultRow agg = g.key;
    agg.replicate.reset();
    agg.metric = g.key.metric + "_mean";
    agg.value = stats::mean(g.values);
    out.add(agg);
    agg.metric = g.key.metric + "_sd";
    agg.value = g.values.size() >= 2 ? stats::sample_sd(g.values) : 0.0;
    out.add(agg);
  }
  return out;
}

// Prevalence estimates of calibrated random forests over a grid of sampling
// rates and per-split feature counts, sharing one train/test pair. Each rate
// gets one undersample and one forest seed, shared across mtry values.
inline ResultTable prevalence_sweep(const SweepConfig& cfg, std::size_t threads = 1) {
  cfg.validate();
  ResultTable table;
  for (auto& kv : cfg.describe()) table.note("config." + kv.first, kv.second);

  const auto train_seed = derive_seed(cfg.seed, {detail::train_tag});
  const auto test_seed = derive_seed(cfg.seed, {detail::test_tag});
  const auto baseline_seed = derive_seed(cfg.seed, {detail::baseline_tag});
  table.note("seed.train", std::to_string(train_seed));
  table.note("seed.test", std::to_string(test_seed));
  table.note("seed.baseline", std::to_string(baseline_seed));

  const Dataset train = generate_dataset(cfg.n_train, cfg.k, train_seed, threads);
  const Dataset test = generate_dataset(cfg.n_test, cfg.k, test_seed, threads);
  const auto baseline = mean_true_probability(cfg.k, cfg.n_mc, baseline_seed, threads);
  table.note("train.positives", std::to_string(train.n_positive()));
  table.note("test.mean_true_prob", format_double(stats::mean(*test.true_probs)));
  table.note("baseline.standard_error", format_double(baseline.standard_error));

  for (std::size_t b = 0; b < cfg.betas.size(); ++b) {
    const double beta = cfg.betas[b];
    const auto us_seed = derive_seed(cfg.seed, {detail::undersample_tag, b});
    const auto forest_seed = derive_seed(cfg.seed, {detail::forest_tag, b});
    const Undersampled us = undersample(train, {beta, us_seed});
    const std::string tag = "beta=" + format_double(beta);
    table.note(tag + ".seed.undersample", std::to_string(us_seed));
    table.note(tag + ".seed.forest", std::to_string(forest_seed));
    table.note(tag + ".realized_beta", format_double(us.realized_beta));
    table.note(tag + ".train_rows", std::to_string(us.data.size()));
    for (auto mtry : cfg.mtry_values) {
      const Forest forest = fit_forest(us.data, {mtry, cfg.n_trees, true, forest_seed}, threads);
      const auto pred = predict_forest(forest, test, threads);
      const auto cal = calibrate_dataset(pred, us.realized_beta);
      table.note(tag + ".mtry=" + std::to_string(mtry) + ".uncalibrated_mean",
                 format_double(stats::mean(pred)));
      table.add({"sweep", beta, mtry, std::nullopt, std::nullopt, "prevalence_estimate",
                 cal.prevalence});
    }
  }
  table.add({"sweep", std::nullopt, std::nullopt, std::nullopt, std::nullopt, "true_prevalence",
             baseline.mean});
  return table;
}

inline constexpr std::size_t qq_levels = 1000;

inline std::string qq_metric(const char* stage, std::size_t level_index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "quantile_%s@%.6f", stage,
                static_cast<double>(level_index) / static_cast<double>(qq_levels - 1));
  return buf;
}

// Prediction distributions of two forests that differ only in mtry, fit to
// the same undersampled data, before and after calibration. Emits, per model,
// 1000 quantiles at levels i/999 per stage, then min/max/mean per stage, then
// the second-over-first ratios of those six statistics.
inline ResultTable qq_experiment(const SweepConfig& cfg, std::size_t threads = 1) {
  auto problems = cfg.problems();
  if (cfg.mtry_values.size() != 2) problems.push_back("mtry_values: qq needs exactly two values");
  if (cfg.betas.size() != 1) problems.push_back("betas: qq needs exactly one value");
  detail::throw_if_problems("qq", problems);

  ResultTable table;
  for (auto& kv : cfg.describe()) table.note("config." + kv.first, kv.second);
  const double beta = cfg.betas.front();
  const auto train_seed = derive_seed(cfg.seed, {detail::train_tag});
  const auto test_seed = derive_seed(cfg.seed, {detail::test_tag});
  const auto us_seed = derive_seed(cfg.seed, {detail::undersample_tag, 0});
  const auto forest_seed = derive_seed(cfg.seed, {detail::forest_tag, 0});
  table.note("seed.train", std::to_string(train_seed));
  table.note("seed.test", std::to_string(test_seed));
  table.note("seed.undersample", std::to_string(us_seed));
  table.note("seed.forest", std::to_string(forest_seed));

  const Dataset train = generate_dataset(cfg.n_train, cfg.k, train_seed, threads);
  const Dataset test = generate_dataset(cfg.n_test, cfg.k, test_seed, threads);
  const Undersampled us = undersample(train, {beta, us_seed});
  table.note("realized_beta", format_double(us.realized_beta));
  table.note("test.mean_true_prob", format_double(stats::mean(*test.true_probs)));

  struct Stage {
    std::vector<double> sorted;
    double min, max, mean;
  };
  auto summarize = [](std::vector<double> v) {
    Stage s;
    s.mean = stats::mean(v);
    std::sort(v.begin(), v.end());
    s.min = v.front();
    s.max = v.back();
    s.sorted = std::move(v);
    return s;
  };

  std::vector<std::pair<Stage, Stage>> models; // (pre, post) per mtry
  for (auto mtry : cfg.mtry_values) {
    const Forest forest = fit_forest(us.data, {mtry, cfg.n_trees, true, forest_seed}, threads);
    auto pred = predict_forest(forest, test, threads);
    auto cal = calibrate_dataset(pred, us.realized_beta);
    models.emplace_back(summarize(std::move(pred)), summarize(std::move(cal.values)));
  }

  for (int stage = 0; stage < 2; ++stage) {
    const char* name = stage == 0 ? "pre" : "post";
    for (std::size_t i = 0; i < qq_levels; ++i) {
      const double level = static_cast<double>(i) / static_cast<double>(qq_levels - 1);
      for (std::size_t m = 0; m < 2; ++m) {
        const Stage& s = stage == 0 ? models[m].first : models[m].second;
        table.add({"qq", beta, cfg.mtry_values[m], std::nullopt, std::nullopt, qq_metric(name, i),
                   stats::quantile_sorted(s.sorted, level)});
      }
    }
  }
  for (std::size_t m = 0; m < 2; ++m) {
    for (int stage = 0; stage < 2; ++stage) {
      const Stage& s = stage == 0 ? models[m].first : models[m].second;
      const std::string sfx = stage == 0 ? "_pre" : "_post";
      table.add({"qq", beta, cfg.mtry_values[m], std::nullopt, std::nullopt, "min" + sfx, s.min});
      table.add({"qq", beta, cfg.mtry_values[m], std::nullopt, std::nullopt, "max" + sfx, s.max});
      table.add({"qq", beta, cfg.mtry_values[m], std::nullopt, std::nullopt, "mean" + sfx, s.mean});
    }
  }
  for (int stage = 0; stage < 2; ++stage) {
    const Stage& a = stage == 0 ? models[0].first : models[0].second;
    const Stage& b = stage == 0 ? models[1].first : models[1].second;
    const std::string sfx = stage == 0 ? "_pre" : "_post";
    table.add({"qq", beta, std::nullopt, std::nullopt, std::nullopt, "ratio_min" + sfx,
               b.min / a.min});
    table.add({"qq", beta, std::nullopt, std::nullopt, std::nullopt, "ratio_max" + sfx,
               b.max / a.max});
    table.add({"qq", beta, std::nullopt, std::nullopt, std::nullopt, "ratio_mean" + sfx,
               b.mean / a.mean});
  }
  return table;
}

// Mean prediction of `tree` on `test` over the mean generating probability.
inline double prediction_ratio(const Tree& tree, const Dataset& test) {
  if (!test.true_probs) throw domain_error("prediction_ratio: test data lacks true_prob");
  const auto pred = predict_tree(tree, test);
  return stats::mean(pred) / stats::mean(*test.true_probs);
}

// One replicate of the single-tree bias study at imbalance parameter k:
// fresh train/test draws, one purity tree on all features, no bootstrap.
inline ResultTable tree_bias_replicate(double k, double level, std::size_t n_train,
                                       std::size_t n_test, std::uint64_t seed) {
  const Dataset train = generate_dataset(n_train, k, derive_seed(seed, {detail::train_tag}));
  const Dataset test = generate_dataset(n_test, k, derive_seed(seed, {detail::test_tag}));
  const Tree tree = fit_tree(train, dgp_features, derive_seed(seed, {detail::tree_tag}));
  ResultTable t;
  t.add({"bias", std::nullopt, std::nullopt, level, std::nullopt, "ratio",
         prediction_ratio(tree, test)});
  t.note("test_prevalence", format_double(stats::mean(*test.true_probs)));
  return t;
}

// Ratio of mean test prediction to mean true probability for purity-fit
// trees across imbalance levels. Each level's k is recovered by root-finding
// on the Monte Carlo prevalence.
inline ResultTable tree_bias_study(const BiasStudyConfig& cfg, std::size_t threads = 1) {
  cfg.validate();
  ResultTable table;
  for (auto& kv : cfg.describe()) table.note("config." + kv.first, kv.second);
  const auto k_seed = derive_seed(cfg.seed, {detail::k_solve_tag});
  table.note("seed.k_solve", std::to_string(k_seed));

  for (std::size_t l = 0; l < cfg.prevalence_targets.size(); ++l) {
    const double target = cfg.prevalence_targets[l];
    const double k = solve_k_for_prevalence(target, cfg.n_mc, k_seed, cfg.k_tolerance * target,
                                            KSearch{}, threads);
    const auto base = derive_seed(cfg.seed, {detail::replicate_tag, l});
    const std::string tag = "level=" + format_double(target);
    table.note(tag + ".k", format_double(k));
    table.note(tag + ".base_seed", std::to_string(base));
    const ExperimentFn op = [&, k, target](std::uint64_t s) {
      return tree_bias_replicate(k, target, cfg.n_train, cfg.n_test, s);
    };
    ResultTable level_table = run_replicates(op, cfg.n_replicates, base, threads);
    for (auto& [key, value] : level_table.metadata) key = tag + "." + key;
    table.append(level_table);
  }
  return table;
}

} // namespace treecal
