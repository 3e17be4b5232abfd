#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "treecal/dataset.hpp"
#include "treecal/error.hpp"
#include "treecal/parallel.hpp"
#include "treecal/random.hpp"

namespace treecal {

inline constexpr std::size_t dgp_features = 10;

struct Range {
  double min;
  double max;
};

// Logistic generating model over ten uniform covariates. The log-odds are
// coefficient * S(x) - k * log(99), where S is a fixed polynomial with ten
// linear, five pairwise and two four-way terms.
struct DgpConfig {
  double k = 1.5;
  std::array<Range, dgp_features> ranges{{{-0.4, 0.6},
                                          {-0.2, 0.8},
                                          {-0.4, 1.0},
                                          {-0.1, 0.9},
                                          {0.0, 5.0},
                                          {0.0, 3.0},
                                          {1.0, 4.0},
                                          {1.0, 7.0},
                                          {1.0, 3.0},
                                          {0.0, 2.0}}};
  double coefficient = std::log(99.0) / 40.0;

  void validate() const {
    for (const auto& r : ranges)
      if (!(r.min < r.max)) throw domain_error("dgp: each covariate range needs min < max");
    if (!(coefficient > 0.0)) throw domain_error("dgp: coefficient must be positive");
    if (!std::isfinite(k)) throw domain_error("dgp: k must be finite");
  }
};

// Interaction polynomial S(x).
inline double dgp_polynomial(std::span<const double> x) {
  if (x.size() != dgp_features)
    throw dimension_error("dgp: expected 10 covariates, got " + std::to_string(x.size()));
  const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3], x5 = x[4];
  const double x6 = x[5], x7 = x[6], x8 = x[7], x9 = x[8], x10 = x[9];
  const double linear = x1 + x2 + x3 + x4 + x5 + x6 + x7 + x8 + x9 + x10;
  const double pairwise = x1 * x3 + x2 * x5 + x4 * x9 + x6 * x7 + x8 * x10;
  const double x12 = x1 * x2;
  const double quartic = x12 * x3 * x4 + x12 * x9 * x10;
  return linear + pairwise + quartic;
}

inline double inverse_logit(double z) noexcept {
  // Branch keeps exp() from overflowing for large |z|.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double true_probability(std::span<const double> x, double k,
                               double coefficient = std::log(99.0) / 40.0) {
  return inverse_logit(coefficient * dgp_polynomial(x) - k * std::log(99.0));
}

namespace detail {

inline constexpr std::uint64_t feature_stream = 0x66656174ULL;
inline constexpr std::uint64_t label_stream = 0x6c61626cULL;
inline constexpr std::size_t generation_block = 1 << 14;

inline void draw_covariates(const DgpConfig& cfg, std::uint64_t feature_key, std::uint64_t row,
                            std::span<double> out) noexcept {
  for (std::size_t j = 0; j < dgp_features; ++j) {
    const double u = counter_uniform(feature_key, row * dgp_features + j);
    const auto& r = cfg.ranges[j];
    out[j] = r.min + (r.max - r.min) * u;
  }
}

} // namespace detail

// Simulated dataset of n rows. Covariates and Bernoulli draws use separate
// counter-based streams keyed by the seed, so the output is identical for any
// thread count.
inline Dataset generate_dataset(std::size_t n, const DgpConfig& cfg, std::uint64_t seed,
                                std::size_t threads = 1) {
  cfg.validate();
  Dataset data;
  data.n_features = dgp_features;
  data.seed = seed;
  data.features.resize(n * dgp_features);
  data.labels.resize(n);
  data.true_probs.emplace(n);

  const std::uint64_t feature_key = derive_seed(seed, {detail::feature_stream});
  const std::uint64_t label_key = derive_seed(seed, {detail::label_stream});
  const std::size_t blocks = (n + detail::generation_block - 1) / detail::generation_block;
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t lo = b * detail::generation_block;
    const std::size_t hi = std::min(n, lo + detail::generation_block);
    for (std::size_t i = lo; i < hi; ++i) {
      std::span<double> row(data.features.data() + i * dgp_features, dgp_features);
      detail::draw_covariates(cfg, feature_key, i, row);
      const double p = true_probability(row, cfg.k, cfg.coefficient);
      (*data.true_probs)[i] = p;
      data.labels[i] = counter_uniform(label_key, i) < p ? 1 : 0;
    }
  });
  return data;
}

inline Dataset generate_dataset(std::size_t n, double k, std::uint64_t seed,
                                std::size_t threads = 1) {
  DgpConfig cfg;
  cfg.k = k;
  return generate_dataset(n, cfg, seed, threads);
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

// Monte Carlo prevalence of the generating model. The covariate draws depend
// only on (seed, n_mc), so estimates at different k share random numbers and
// the estimated curve is monotone in k.
inline MonteCarloEstimate mean_true_probability(const DgpConfig& cfg, std::size_t n_mc,
                                                std::uint64_t seed, std::size_t threads = 1) {
  cfg.validate();
  if (n_mc == 0) throw domain_error("mean_true_probability: n_mc must be >= 1");
  const std::uint64_t feature_key = derive_seed(seed, {detail::feature_stream});
  const std::size_t blocks = (n_mc + detail::generation_block - 1) / detail::generation_block;
  std::vector<std::pair<double, double>> partial(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t lo = b * detail::generation_block;
    const std::size_t hi = std::min(n_mc, lo + detail::generation_block);
    std::array<double, dgp_features> x{};
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      detail::draw_covariates(cfg, feature_key, i, x);
      const double p = true_probability(x, cfg.k, cfg.coefficient);
      sum += p;
      sum_sq += p * p;
    }
    partial[b] = {sum, sum_sq};
  });
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& [s, q] : partial) {
    sum += s;
    sum_sq += q;
  }
  const double n = static_cast<double>(n_mc);
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
  return {mean, std::sqrt(var / n)};
}

inline MonteCarloEstimate mean_true_probability(double k, std::size_t n_mc, std::uint64_t seed,
                                                std::size_t threads = 1) {
  DgpConfig cfg;
  cfg.k = k;
  return mean_true_probability(cfg, n_mc, seed, threads);
}

struct KSearch {
  double k_lo = 0.0;
  double k_hi = 10.0;
  int max_iterations = 200;
};

// Bisection for the k whose Monte Carlo prevalence is within tol of target.
inline double solve_k_for_prevalence(double target, std::size_t n_mc, std::uint64_t seed,
                                     double tol, KSearch search = {}, std::size_t threads = 1) {
  if (!(target > 0.0 && target < 1.0))
    throw domain_error("solve_k_for_prevalence: target must lie in (0,1)");
  if (!(tol > 0.0)) throw domain_error("solve_k_for_prevalence: tol must be > 0");
  if (!(search.k_lo < search.k_hi)) throw domain_error("solve_k_for_prevalence: empty bracket");

  auto prevalence = [&](double k) { return mean_true_probability(k, n_mc, seed, threads).mean; };
  double lo = search.k_lo, hi = search.k_hi;
  const double at_lo = prevalence(lo);
  const double at_hi = prevalence(hi);
  if (std::abs(at_lo - target) <= tol) return lo;
  if (std::abs(at_hi - target) <= tol) return hi;
  // Prevalence decreases in k.
  if (!(at_hi < target && target < at_lo))
    throw bracket_error("solve_k_for_prevalence: target " + std::to_string(target) +
                        " outside [" + std::to_string(at_hi) + ", " + std::to_string(at_lo) +
                        "] reachable on k in [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
  for (int it = 0; it < search.max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double value = prevalence(mid);
    if (std::abs(value - target) <= tol) return mid;
    (value > target ? lo : hi) = mid;
  }
  throw bracket_error("solve_k_for_prevalence: tolerance not reached; increase tol or n_mc");
}

} // namespace treecal
