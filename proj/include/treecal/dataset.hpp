#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treecal/error.hpp"

namespace treecal {

// Binary-labelled feature matrix, stored row-major. true_probs carries the
// generating probabilities when the data are simulated.
struct Dataset {
  std::size_t n_features = 0;
  std::vector<double> features;
  std::vector<std::uint8_t> labels;
  std::optional<std::vector<double>> true_probs;
  std::optional<std::uint64_t> seed;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }

  std::span<const double> row(std::size_t i) const noexcept {
    return {features.data() + i * n_features, n_features};
  }

  std::size_t n_positive() const noexcept {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  }
  std::size_t n_negative() const noexcept { return size() - n_positive(); }

  double positive_fraction() const noexcept {
    return empty() ? 0.0 : static_cast<double>(n_positive()) / static_cast<double>(size());
  }

  // Throws domain_error if the shape or value invariants are broken.
  void validate() const {
    if (features.size() != labels.size() * n_features)
      throw domain_error("dataset: feature matrix size " + std::to_string(features.size()) +
                         " != rows * width (" + std::to_string(labels.size()) + " * " +
                         std::to_string(n_features) + ")");
    for (auto y : labels)
      if (y > 1) throw domain_error("dataset: label outside {0,1}");
    if (true_probs) {
      if (true_probs->size() != labels.size())
        throw domain_error("dataset: true_probs length differs from row count");
      for (double p : *true_probs)
        if (!(p >= 0.0 && p <= 1.0)) throw domain_error("dataset: true_prob outside [0,1]");
    }
  }

  // Rows at the given indices, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.n_features = n_features;
    out.features.reserve(indices.size() * n_features);
    out.labels.reserve(indices.size());
    if (true_probs) out.true_probs.emplace().reserve(indices.size());
    for (auto i : indices) {
      auto r = row(i);
      out.features.insert(out.features.end(), r.begin(), r.end());
      out.labels.push_back(labels[i]);
      if (true_probs) out.true_probs->push_back((*true_probs)[i]);
    }
    return out;
  }
};

} // namespace treecal
