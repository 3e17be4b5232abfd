#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "treecal/error.hpp"

namespace treecal {

namespace detail {

inline void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw domain_error(std::string(what) + ": probability must lie in [0,1], got " +
                       std::to_string(p));
}

inline void check_rate(double beta, const char* what) {
  if (!(beta > 0.0 && beta <= 1.0))
    throw domain_error(std::string(what) + ": sampling rate must lie in (0,1], got " +
                       std::to_string(beta));
}

} // namespace detail

// Maps a score learned on majority-undersampled data (rate beta) back to the
// original class balance:  beta * p_s / (beta * p_s - p_s + 1).
// The denominator is evaluated as beta * p_s + (1 - p_s), which is exact at
// both endpoints.
inline double calibrate(double p_s, double beta) {
  detail::check_probability(p_s, "calibrate");
  detail::check_rate(beta, "calibrate");
  return beta * p_s / (beta * p_s + (1.0 - p_s));
}

// Inverse of calibrate: the score an undersampled model would need to emit
// for calibrate to return p.
inline double decalibrate(double p, double beta) {
  detail::check_probability(p, "decalibrate");
  detail::check_rate(beta, "decalibrate");
  return p / (p + beta * (1.0 - p));
}

// calibrate(p_s, beta) == p_s * adjustment_factor(p_s, beta). Rises from beta
// at p_s = 0 to 1 at p_s = 1 and is nearly flat for small scores.
inline double adjustment_factor(double p_s, double beta) {
  detail::check_probability(p_s, "adjustment_factor");
  detail::check_rate(beta, "adjustment_factor");
  return beta / (beta * p_s + (1.0 - p_s));
}

struct CalibrationMap {
  double beta = 1.0;

  explicit CalibrationMap(double rate) : beta(rate) { detail::check_rate(rate, "CalibrationMap"); }

  double operator()(double p_s) const { return calibrate(p_s, beta); }
  double inverse(double p) const { return decalibrate(p, beta); }
  double factor(double p_s) const { return adjustment_factor(p_s, beta); }
};

struct CalibratedPredictions {
  std::vector<double> values;
  // Mean calibrated prediction.
  double prevalence = 0.0;
};

inline CalibratedPredictions calibrate_dataset(std::span<const double> predictions, double beta) {
  if (predictions.empty()) throw domain_error("calibrate_dataset: no predictions");
  CalibratedPredictions out;
  out.values.reserve(predictions.size());
  double sum = 0.0;
  for (double p : predictions) {
    const double c = calibrate(p, beta);
    out.values.push_back(c);
    sum += c;
  }
  out.prevalence = sum / static_cast<double>(predictions.size());
  return out;
}

} // namespace treecal
