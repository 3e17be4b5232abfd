// treecal command-line driver: data generation, model fitting, calibration
// and the three simulation experiments. Exit codes: 0 success, 1 usage or
// configuration error, 2 runtime failure.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "treecal/treecal.hpp"

namespace {

using namespace treecal;

constexpr int exit_usage = 1;
constexpr int exit_runtime = 2;

struct SharedFlags {
  std::uint64_t seed = 1;
  std::size_t threads = hardware_threads();
  std::string out;
  std::string config;
  bool paper_scale = false;
};

void add_seed_threads(CLI::App* cmd, SharedFlags& f) {
  cmd->add_option("--seed", f.seed, "Master random seed");
  cmd->add_option("--threads", f.threads, "Worker threads (output does not depend on this)")
      ->check(CLI::PositiveNumber);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  return os;
}

void log_resolved(const char* cmd, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::cerr << "[treecal " << cmd << "] resolved config:";
  for (const auto& [k, v] : kv) std::cerr << ' ' << k << '=' << v;
  std::cerr << '\n';
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::size_t n = 0;
  double k = 1.5;
};

int run_generate(const GenerateArgs& a, const SharedFlags& f) {
  log_resolved("generate", {{"n", std::to_string(a.n)},
                            {"k", format_double(a.k)},
                            {"seed", std::to_string(f.seed)},
                            {"out", f.out}});
  const Dataset data = generate_dataset(a.n, a.k, f.seed, f.threads);
  save_dataset_csv(f.out, data);
  std::cout << "n " << data.size() << "\npositives " << data.n_positive() << "\nprevalence "
            << format_double(data.positive_fraction()) << '\n';
  return 0;
}

struct FitArgs {
  std::string data;
  std::size_t mtry = 0;
  std::size_t trees = 500;
  int bootstrap = 1;
};

int run_fit(const FitArgs& a, const SharedFlags& f) {
  const Dataset data = load_dataset_csv(a.data);
  const std::size_t mtry = a.mtry == 0 ? data.n_features : a.mtry;
  log_resolved("fit", {{"data", a.data},
                       {"mtry", std::to_string(mtry)},
                       {"trees", std::to_string(a.trees)},
                       {"bootstrap", std::to_string(a.bootstrap)},
                       {"seed", std::to_string(f.seed)},
                       {"out", f.out}});
  const Forest forest = fit_forest(data, {mtry, a.trees, a.bootstrap != 0, f.seed}, f.threads);
  save_forest(f.out, forest);
  std::cout << "trees " << forest.n_trees() << "\nrows " << data.size() << '\n';
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string data;
};

int run_predict(const PredictArgs& a, const SharedFlags& f) {
  log_resolved("predict", {{"model", a.model}, {"data", a.data}, {"out", f.out}});
  const Forest forest = load_forest(a.model);
  const Dataset data = load_dataset_csv(a.data);
  const auto scores = predict_forest(forest, data, f.threads);
  auto os = open_out(f.out);
  os << "label" << (data.true_probs ? ",true_prob" : "") << ",score\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << int(data.labels[i]);
    if (data.true_probs) os << ',' << format_double((*data.true_probs)[i]);
    os << ',' << format_double(scores[i]) << '\n';
  }
  std::cout << "rows " << data.size() << "\nmean_score "
            << format_double(scores.empty() ? 0.0 : stats::mean(scores)) << '\n';
  return 0;
}

struct CalibrateArgs {
  std::string in;
  double beta = 1.0;
};

// Copies every input line and appends a `calibrated` column computed from
// the `score` column.
int run_calibrate(const CalibrateArgs& a, const SharedFlags& f) {
  log_resolved("calibrate", {{"in", a.in}, {"beta", format_double(a.beta)}, {"out", f.out}});
  if (!(a.beta > 0.0 && a.beta <= 1.0))
    throw config_error("beta: must lie in (0,1], got " + format_double(a.beta));
  std::ifstream is(a.in, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + a.in + "' for reading");
  std::string line;
  if (!std::getline(is, line)) throw parse_error("calibrate: missing header (line 1)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  std::size_t score_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (trim(header[c]) == "score") score_col = c;
  if (score_col == header.size()) throw parse_error("calibrate: no 'score' column (line 1)");

  std::ostringstream out;
  out << line << ",calibrated\n";
  double sum = 0.0;
  std::size_t n = 0, line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    double score;
    if (fields.size() != header.size() || !parse_double(fields[score_col], score) ||
        !(score >= 0.0 && score <= 1.0))
      throw parse_error("calibrate: malformed row, expected " + std::to_string(header.size()) +
                        " fields with score in [0,1] (line " + std::to_string(line_no) + ")");
    const double c = calibrate(score, a.beta);
    sum += c;
    ++n;
    out << line << ',' << format_double(c) << '\n';
  }
  auto os = open_out(f.out);
  os << out.str();
  std::cout << "rows " << n << "\nprevalence_estimate "
            << format_double(n ? sum / static_cast<double>(n) : 0.0) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

// Experiment flags. Each optional is applied only when given, after the
// config file, so flags override file values.
struct ExperimentFlags {
  std::optional<std::size_t> n_train, n_test, n_trees, n_mc, replicates;
  std::optional<double> k, k_tolerance;
  std::optional<std::string> betas, mtry, targets;
};

template <typename Config>
void apply_flag(Config& cfg, const char* key, const std::optional<std::string>& v) {
  if (v && !apply_setting(cfg, key, *v)) throw config_error(std::string(key) + ": not applicable");
}

template <typename Config>
void apply_flag(Config& cfg, const char* key, const std::optional<std::size_t>& v) {
  if (v) apply_flag(cfg, key, std::optional<std::string>(std::to_string(*v)));
}

template <typename Config>
void apply_flag(Config& cfg, const char* key, const std::optional<double>& v) {
  if (v) apply_flag(cfg, key, std::optional<std::string>(format_double(*v)));
}

template <typename Config>
Config resolve(Config cfg, const SharedFlags& f, CLI::App* cmd) {
  if (!f.config.empty()) apply_config(cfg, KeyValueConfig::load(f.config));
  if (cmd->count("--seed")) cfg.seed = f.seed;
  return cfg;
}

SweepConfig resolve_sweep(const ExperimentFlags& e, const SharedFlags& f, CLI::App* cmd,
                          SweepConfig base) {
  SweepConfig cfg = resolve(base, f, cmd);
  apply_flag(cfg, "n_train", e.n_train);
  apply_flag(cfg, "n_test", e.n_test);
  apply_flag(cfg, "n_trees", e.n_trees);
  apply_flag(cfg, "n_mc", e.n_mc);
  apply_flag(cfg, "k", e.k);
  apply_flag(cfg, "betas", e.betas);
  apply_flag(cfg, "mtry_values", e.mtry);
  return cfg;
}

void write_outputs(const ResultTable& table, const std::string& out) {
  {
    auto os = open_out(out);
    write_result_csv(os, table);
  }
  auto meta = open_out(out + ".meta");
  write_metadata(meta, table);
}

template <typename Config>
void log_config(const char* cmd, const Config& cfg) {
  log_resolved(cmd, cfg.describe());
}

void add_sweep_flags(CLI::App* cmd, ExperimentFlags& e) {
  cmd->add_option("--n-train", e.n_train, "Training rows");
  cmd->add_option("--n-test", e.n_test, "Test rows");
  cmd->add_option("--trees", e.n_trees, "Trees per forest");
  cmd->add_option("--n-mc", e.n_mc, "Monte Carlo draws for the true prevalence");
  cmd->add_option("--k", e.k, "Imbalance parameter");
  cmd->add_option("--mtry", e.mtry, "Comma-separated per-split feature counts");
}

void add_experiment_shared(CLI::App* cmd, SharedFlags& f) {
  add_seed_threads(cmd, f);
  cmd->add_option("--out", f.out, "Result CSV path (metadata goes to <out>.meta)")->required();
  cmd->add_option("--config", f.config, "key = value configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_flag("--paper-scale", f.paper_scale, "Use full-size datasets and forests");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree ensembles, undersampling and analytical calibration"};
  app.require_subcommand(1);
  SharedFlags shared;

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Simulate a dataset from the logistic model");
  generate->add_option("--n", gen.n, "Rows")->required();
  generate->add_option("--k", gen.k, "Imbalance parameter")->required();
  generate->add_option("--out", shared.out, "Output CSV")->required();
  add_seed_threads(generate, shared);
  generate->get_option("--seed")->required();

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit a random forest to a dataset CSV");
  fit->add_option("--data", fit_args.data, "Training CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--mtry", fit_args.mtry, "Features tried per split (default: all)");
  fit->add_option("--trees", fit_args.trees, "Number of trees")->check(CLI::PositiveNumber);
  fit->add_option("--bootstrap", fit_args.bootstrap, "Bootstrap each tree (0 or 1)")
      ->check(CLI::IsMember({0, 1}));
  fit->add_option("--out", shared.out, "Model file")->required();
  add_seed_threads(fit, shared);

  PredictArgs pred_args;
  auto* predict = app.add_subcommand("predict", "Score a dataset CSV with a saved forest");
  predict->add_option("--model", pred_args.model, "Model file")->required()->check(CLI::ExistingFile);
  predict->add_option("--data", pred_args.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", shared.out, "Score CSV")->required();
  add_seed_threads(predict, shared);

  CalibrateArgs cal_args;
  auto* calib = app.add_subcommand("calibrate", "Undo undersampling bias in a score CSV");
  calib->add_option("--in", cal_args.in, "CSV with a score column")->required()->check(CLI::ExistingFile);
  calib->add_option("--beta", cal_args.beta, "Majority-class sampling rate")->required();
  calib->add_option("--out", shared.out, "Output CSV")->required();
  add_seed_threads(calib, shared);

  ExperimentFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Prevalence estimates over sampling rate x mtry");
  add_experiment_shared(sweep, shared);
  add_sweep_flags(sweep, sweep_flags);
  sweep->add_option("--betas", sweep_flags.betas, "Comma-separated sampling rates");

  ExperimentFlags qq_flags;
  auto* qq = app.add_subcommand("qq", "Quantile comparison of two forests");
  add_experiment_shared(qq, shared);
  add_sweep_flags(qq, qq_flags);
  qq->add_option("--beta", qq_flags.betas, "Sampling rate");

  ExperimentFlags bias_flags;
  auto* bias = app.add_subcommand("bias", "Single-tree prediction bias across imbalance levels");
  add_experiment_shared(bias, shared);
  bias->add_option("--targets", bias_flags.targets, "Comma-separated prevalence targets");
  bias->add_option("--n-train", bias_flags.n_train, "Training rows");
  bias->add_option("--n-test", bias_flags.n_test, "Test rows");
  bias->add_option("--replicates", bias_flags.replicates, "Replicates per level");
  bias->add_option("--n-mc", bias_flags.n_mc, "Monte Carlo draws for root-finding");
  bias->add_option("--k-tolerance", bias_flags.k_tolerance, "Relative prevalence tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_usage;
  }

  try {
    if (*generate) return run_generate(gen, shared);
    if (*fit) return run_fit(fit_args, shared);
    if (*predict) return run_predict(pred_args, shared);
    if (*calib) return run_calibrate(cal_args, shared);
    if (*sweep) {
      auto base = shared.paper_scale ? SweepConfig::paper_scale() : SweepConfig{};
      const SweepConfig cfg = resolve_sweep(sweep_flags, shared, sweep, base);
      cfg.validate();
      log_config("sweep", cfg);
      write_outputs(prevalence_sweep(cfg, shared.threads), shared.out);
      return 0;
    }
    if (*qq) {
      auto base = shared.paper_scale ? SweepConfig::paper_scale() : SweepConfig{};
      base.betas = {0.03};
      base.mtry_values = {2, 10};
      const SweepConfig cfg = resolve_sweep(qq_flags, shared, qq, base);
      log_config("qq", cfg);
      write_outputs(qq_experiment(cfg, shared.threads), shared.out);
      return 0;
    }
    if (*bias) {
      auto base = shared.paper_scale ? BiasStudyConfig::paper_scale() : BiasStudyConfig{};
      BiasStudyConfig cfg = resolve(base, shared, bias);
      apply_flag(cfg, "prevalence_targets", bias_flags.targets);
      apply_flag(cfg, "n_train", bias_flags.n_train);
      apply_flag(cfg, "n_test", bias_flags.n_test);
      apply_flag(cfg, "n_replicates", bias_flags.replicates);
      apply_flag(cfg, "n_mc", bias_flags.n_mc);
      apply_flag(cfg, "k_tolerance", bias_flags.k_tolerance);
      cfg.validate();
      log_config("bias", cfg);
      write_outputs(tree_bias_study(cfg, shared.threads), shared.out);
      return 0;
    }
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_usage;
}
