#pragma once

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "treecal/dataset.hpp"
#include "treecal/error.hpp"
#include "treecal/random.hpp"

namespace treecal {

struct SamplingSpec {
  double beta = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(beta > 0.0 && beta <= 1.0))
      throw domain_error("sampling rate beta must lie in (0, 1], got " + std::to_string(beta));
  }
};

struct Undersampled {
  Dataset data;
  std::size_t negatives_total = 0;
  std::size_t negatives_kept = 0;
  // kept / total; calibration consumes this rather than the nominal rate.
  double realized_beta = 1.0;
};

// Number of majority rows kept for rate beta: beta * n_neg rounded half to even.
inline std::size_t undersample_count(double beta, std::size_t n_neg) {
  const double target = beta * static_cast<double>(n_neg);
  const int old_mode = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double rounded = std::nearbyint(target);
  std::fesetround(old_mode);
  return static_cast<std::size_t>(rounded);
}

// Keeps every positive row and exactly undersample_count(beta, N-) negatives
// drawn uniformly without replacement. Kept rows stay in input order.
inline Undersampled undersample(const Dataset& data, const SamplingSpec& spec) {
  spec.validate();
  std::vector<std::size_t> negatives;
  negatives.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.labels[i] == 0) negatives.push_back(i);
  if (negatives.empty()) throw degenerate_sample_error("undersample: dataset has no negatives");

  const std::size_t keep = undersample_count(spec.beta, negatives.size());
  if (keep == 0)
    throw degenerate_sample_error("undersample: round(beta * N-) = 0 for beta=" +
                                  std::to_string(spec.beta) +
                                  ", N-=" + std::to_string(negatives.size()));

  // Partial Fisher-Yates: the first `keep` slots become the sample.
  Rng rng(derive_seed(spec.seed, {0x756e6472ULL}));
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + rng.below(negatives.size() - i);
    std::swap(negatives[i], negatives[j]);
  }
  std::vector<std::uint8_t> kept(data.size(), 0);
  for (std::size_t i = 0; i < keep; ++i) kept[negatives[i]] = 1;

  std::vector<std::size_t> rows;
  rows.reserve(data.size() - negatives.size() + keep);
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.labels[i] == 1 || kept[i]) rows.push_back(i);

  Undersampled out;
  out.data = data.subset(rows);
  out.data.seed = spec.seed;
  out.negatives_total = negatives.size();
  out.negatives_kept = keep;
  out.realized_beta = static_cast<double>(keep) / static_cast<double>(negatives.size());
  return out;
}

// P(minority row appears in a bootstrap of the n_pos minority rows):
// 1 - ((n_pos - 1) / n_pos)^n_pos, tending to 1 - 1/e.
inline double inclusion_prob_minority_bootstrap(std::size_t n_pos) {
  if (n_pos == 0) throw domain_error("inclusion probability: n_pos must be >= 1");
  const double n = static_cast<double>(n_pos);
  // log1p keeps the power accurate for large counts.
  return -std::expm1(n * std::log1p(-1.0 / n));
}

// Majority inclusion when n_pos majority rows are drawn with replacement
// from n_neg (balanced bootstrap).
inline double inclusion_prob_majority_balanced(std::size_t n_pos, std::size_t n_neg) {
  if (n_pos == 0 || n_neg == 0) throw domain_error("inclusion probability: counts must be >= 1");
  const double neg = static_cast<double>(n_neg);
  return -std::expm1(static_cast<double>(n_pos) * std::log1p(-1.0 / neg));
}

// Majority inclusion when n_pos of n_neg rows are undersampled without
// replacement and then bootstrapped alongside the minority rows.
inline double inclusion_prob_majority_standard(std::size_t n_pos, std::size_t n_neg) {
  if (n_pos == 0 || n_neg == 0) throw domain_error("inclusion probability: counts must be >= 1");
  if (n_neg < n_pos) throw domain_error("inclusion probability: requires n_neg >= n_pos");
  return static_cast<double>(n_pos) / static_cast<double>(n_neg) *
         inclusion_prob_minority_bootstrap(n_pos);
}

// Posterior among included rows: P(Y=1 | S=1, x) from P(Y=1 | x) and the
// class-conditional inclusion probabilities.
inline double biased_posterior(double p, double incl_pos, double incl_neg) {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(p) || !unit(incl_pos) || !unit(incl_neg))
    throw domain_error("biased_posterior: inputs must lie in [0,1]");
  if (!(incl_pos + incl_neg > 0.0))
    throw domain_error("biased_posterior: both inclusion probabilities are zero");
  const double pos = incl_pos * p;
  const double neg = incl_neg * (1.0 - p);
  if (pos + neg == 0.0)
    throw domain_error("biased_posterior: posterior undefined (zero inclusion mass)");
  return pos / (pos + neg);
}

} // namespace treecal
