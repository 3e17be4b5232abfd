#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "treecal/dataset.hpp"
#include "treecal/error.hpp"
#include "treecal/random.hpp"

namespace treecal {

// Flat preorder node. The left child of an internal node is always the next
// node; `right` holds the index of the right child. Routing: x[feature] <=
// threshold goes left.
struct TreeNode {
  std::int32_t feature = -1; // -1 marks a leaf
  std::uint32_t right = 0;
  double threshold = 0.0;
  double pos_fraction = 0.0;   // weighted positive fraction of the node's rows
  std::uint64_t n_samples = 0; // weighted training rows reaching the node

  bool is_leaf() const noexcept { return feature < 0; }
};

class Tree {
public:
  Tree() = default;
  Tree(std::size_t n_features, std::vector<TreeNode> nodes)
      : n_features_(n_features), nodes_(std::move(nodes)) {}

  std::size_t n_features() const noexcept { return n_features_; }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  // Index of the leaf that x is routed to. No width check.
  std::size_t leaf_index(const double* x) const noexcept {
    std::size_t i = 0;
    const TreeNode* n = nodes_.data();
    while (n[i].feature >= 0) {
      i = x[n[i].feature] <= n[i].threshold ? i + 1 : n[i].right;
    }
    return i;
  }

  double predict(std::span<const double> x) const {
    if (x.size() != n_features_)
      throw dimension_error("predict_tree: expected " + std::to_string(n_features_) +
                            " features, got " + std::to_string(x.size()));
    return nodes_[leaf_index(x.data())].pos_fraction;
  }

  std::size_t n_leaves() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  std::size_t depth() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      deepest = std::max(deepest, d[i]);
      if (!nodes_[i].is_leaf()) {
        d[i + 1] = d[i] + 1;
        d[nodes_[i].right] = d[i] + 1;
      }
    }
    return deepest;
  }

  friend bool operator==(const Tree& a, const Tree& b) {
    if (a.n_features_ != b.n_features_ || a.nodes_.size() != b.nodes_.size()) return false;
    for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
      const auto &x = a.nodes_[i], &y = b.nodes_[i];
      if (x.feature != y.feature || x.right != y.right || x.threshold != y.threshold ||
          x.pos_fraction != y.pos_fraction || x.n_samples != y.n_samples)
        return false;
    }
    return true;
  }

private:
  std::size_t n_features_ = 0;
  std::vector<TreeNode> nodes_;
};

inline double predict_tree(const Tree& tree, std::span<const double> x) { return tree.predict(x); }

// Column-major copy of a dataset's features; split search scans one column
// at a time.
class FeatureColumns {
public:
  explicit FeatureColumns(const Dataset& data)
      : n_rows_(data.size()), n_features_(data.n_features), values_(data.features.size()) {
    for (std::size_t i = 0; i < n_rows_; ++i)
      for (std::size_t f = 0; f < n_features_; ++f)
        values_[f * n_rows_ + i] = data.features[i * n_features_ + f];
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_features() const noexcept { return n_features_; }
  const double* column(std::size_t f) const noexcept { return values_.data() + f * n_rows_; }

private:
  std::size_t n_rows_;
  std::size_t n_features_;
  std::vector<double> values_;
};

namespace detail {

using u128 = unsigned __int128;

// Split quality is the Gini "purity" sum  (p_L^2 + q_L^2)/w_L + (p_R^2 + q_R^2)/w_R
// over weighted class counts. Maximising it minimises the weighted child Gini
// impurity. Comparisons fall back to exact integer arithmetic when the
// floating-point scores are too close to order reliably, so ties are real ties.
struct SplitCounts {
  std::uint64_t wl = 0, pl = 0; // left weight, left positive weight
  std::uint64_t w = 0, p = 0;   // node totals

  double score() const noexcept {
    const double l = static_cast<double>(wl), r = static_cast<double>(w - wl);
    const double lp = static_cast<double>(pl), lq = l - lp;
    const double rp = static_cast<double>(p - pl), rq = r - rp;
    return (lp * lp + lq * lq) / l + (rp * rp + rq * rq) / r;
  }
  u128 numerator() const noexcept {
    const std::uint64_t wr = w - wl, ql = wl - pl, pr = p - pl, qr = wr - pr;
    return (u128(pl) * pl + u128(ql) * ql) * wr + (u128(pr) * pr + u128(qr) * qr) * wl;
  }
  u128 denominator() const noexcept { return u128(wl) * (w - wl); }
};

// -1, 0, +1 as a's purity is below, equal to, above b's (same node totals).
inline int compare_splits(const SplitCounts& a, const SplitCounts& b) noexcept {
  const double sa = a.score(), sb = b.score();
  if (std::abs(sa - sb) > 1e-9 * std::max(std::abs(sa), std::abs(sb))) return sa < sb ? -1 : 1;
  const u128 lhs = a.numerator() * b.denominator();
  const u128 rhs = b.numerator() * a.denominator();
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

// True when the split strictly lowers weighted Gini impurity below the parent's.
inline bool reduces_impurity(const SplitCounts& s) noexcept {
  const std::uint64_t q = s.w - s.p;
  const u128 parent = u128(s.p) * s.p + u128(q) * q;
  return s.numerator() * s.w > parent * s.denominator();
}

// Threshold between consecutive distinct values; always < hi so that both
// sides receive at least one row.
inline double split_threshold(double lo, double hi) noexcept {
  const double t = std::midpoint(lo, hi);
  return t < hi ? t : lo;
}

struct SplitCandidate {
  bool valid = false;
  std::int32_t feature = -1;
  double threshold = 0.0;
  SplitCounts counts;
};

// Replace `best` with `c` when c is purer, or equally pure on a lower feature
// index. Within one feature candidates arrive in increasing threshold order,
// so the lowest threshold wins ties there.
inline void consider(SplitCandidate& best, const SplitCandidate& c) noexcept {
  if (!best.valid) {
    best = c;
    return;
  }
  const int cmp = compare_splits(c.counts, best.counts);
  if (cmp > 0 || (cmp == 0 && c.feature < best.feature)) best = c;
}

struct SortEntry {
  double value;
  std::uint32_t weight;
  std::uint32_t pos_weight;
};

class TreeBuilder {
public:
  TreeBuilder(const FeatureColumns& cols, std::span<const std::uint8_t> labels,
              std::span<const std::uint32_t> weights, std::size_t mtry, Rng rng)
      : cols_(cols), labels_(labels), weights_(weights), mtry_(mtry), rng_(rng) {}

  Tree build() {
    const std::size_t n = cols_.n_rows();
    std::vector<std::uint32_t> rows;
    rows.reserve(n);
    std::uint64_t w = 0, p = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (weights_[i] == 0) continue;
      rows.push_back(static_cast<std::uint32_t>(i));
      w += weights_[i];
      p += labels_[i] ? weights_[i] : 0;
    }
    if (rows.empty()) throw domain_error("fit_tree: no training rows");
    rows_ = std::move(rows);
    buffer_.reserve(rows_.size());
    order_.resize(cols_.n_features());

    struct Frame {
      std::size_t lo, hi;
      std::uint64_t w, p;
      std::int64_t parent; // node whose right child this frame becomes, or -1
    };
    std::vector<Frame> stack{{0, rows_.size(), w, p, -1}};
    std::vector<TreeNode> nodes;
    while (!stack.empty()) {
      const Frame fr = stack.back();
      stack.pop_back();
      const auto idx = static_cast<std::uint32_t>(nodes.size());
      if (fr.parent >= 0) nodes[static_cast<std::size_t>(fr.parent)].right = idx;

      TreeNode node;
      node.n_samples = fr.w;
      node.pos_fraction = static_cast<double>(fr.p) / static_cast<double>(fr.w);
      if (fr.p == 0 || fr.p == fr.w) {
        nodes.push_back(node);
        continue;
      }
      const SplitCandidate split = find_split(fr.lo, fr.hi, fr.w, fr.p);
      if (!split.valid) {
        nodes.push_back(node);
        continue;
      }
      node.feature = split.feature;
      node.threshold = split.threshold;
      nodes.push_back(node);

      const double* col = cols_.column(static_cast<std::size_t>(split.feature));
      const double t = split.threshold;
      auto mid_it = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(fr.lo),
                                   rows_.begin() + static_cast<std::ptrdiff_t>(fr.hi),
                                   [&](std::uint32_t r) { return col[r] <= t; });
      const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());
      const auto& c = split.counts;
      stack.push_back({mid, fr.hi, c.w - c.wl, c.p - c.pl, static_cast<std::int64_t>(idx)});
      stack.push_back({fr.lo, mid, c.wl, c.pl, -1});
    }
    return Tree(cols_.n_features(), std::move(nodes));
  }

private:
  // Best split on one feature over rows_[lo, hi); invalid if the feature is
  // constant there.
  SplitCandidate best_on_feature(std::size_t f, std::size_t lo, std::size_t hi, std::uint64_t w,
                                 std::uint64_t p) {
    const double* col = cols_.column(f);
    buffer_.clear();
    for (std::size_t i = lo; i < hi; ++i) {
      const std::uint32_t r = rows_[i];
      const std::uint32_t wt = weights_[r];
      buffer_.push_back({col[r], wt, labels_[r] ? wt : 0u});
    }
    std::sort(buffer_.begin(), buffer_.end(),
              [](const SortEntry& a, const SortEntry& b) { return a.value < b.value; });

    SplitCandidate best;
    if (buffer_.front().value == buffer_.back().value) return best;
    SplitCandidate cur;
    cur.valid = true;
    cur.feature = static_cast<std::int32_t>(f);
    cur.counts.w = w;
    cur.counts.p = p;
    double best_score = -1.0;
    const std::size_t m = buffer_.size();
    for (std::size_t i = 0; i + 1 < m; ++i) {
      cur.counts.wl += buffer_[i].weight;
      cur.counts.pl += buffer_[i].pos_weight;
      if (!(buffer_[i].value < buffer_[i + 1].value)) continue;
      const double s = cur.counts.score();
      // Cheap reject; the exact comparison only runs near ties.
      if (best.valid && s < best_score * (1.0 - 1e-9)) continue;
      if (!best.valid || compare_splits(cur.counts, best.counts) > 0) {
        cur.threshold = split_threshold(buffer_[i].value, buffer_[i + 1].value);
        best = cur;
        best_score = s;
      }
    }
    return best;
  }

  SplitCandidate find_split(std::size_t lo, std::size_t hi, std::uint64_t w, std::uint64_t p) {
    const std::size_t d = order_.size();
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = 0; i + 1 < d; ++i) std::swap(order_[i], order_[i + rng_.below(d - i)]);

    SplitCandidate best;
    for (std::size_t k = 0; k < mtry_; ++k) consider_feature(best, order_[k], lo, hi, w, p);
    if (best.valid && reduces_impurity(best.counts)) return best;
    // No impurity-reducing split among the sampled features: widen the search
    // so the node can still be split towards purity.
    for (std::size_t k = mtry_; k < d; ++k) consider_feature(best, order_[k], lo, hi, w, p);
    return best;
  }

  void consider_feature(SplitCandidate& best, std::size_t f, std::size_t lo, std::size_t hi,
                        std::uint64_t w, std::uint64_t p) {
    const SplitCandidate c = best_on_feature(f, lo, hi, w, p);
    if (c.valid) consider(best, c);
  }

  const FeatureColumns& cols_;
  std::span<const std::uint8_t> labels_;
  std::span<const std::uint32_t> weights_;
  std::size_t mtry_;
  Rng rng_;
  std::vector<std::uint32_t> rows_;
  std::vector<SortEntry> buffer_;
  std::vector<std::size_t> order_;
};

inline void check_mtry(std::size_t mtry, std::size_t d) {
  if (mtry < 1 || mtry > d)
    throw domain_error("mtry must lie in [1, " + std::to_string(d) + "], got " +
                       std::to_string(mtry));
}

inline constexpr std::uint64_t tree_stream = 0x74726565ULL;

} // namespace detail

// Fits a classification tree with integer row weights (bootstrap counts).
// Rows with weight 0 are ignored.
inline Tree fit_tree(const FeatureColumns& cols, std::span<const std::uint8_t> labels,
                     std::span<const std::uint32_t> weights, std::size_t mtry, Rng rng) {
  detail::check_mtry(mtry, cols.n_features());
  if (labels.size() != cols.n_rows() || weights.size() != cols.n_rows())
    throw dimension_error("fit_tree: labels/weights length differs from row count");
  return detail::TreeBuilder(cols, labels, weights, mtry, rng).build();
}

// CART tree grown to purity: Gini splits at midpoints, no depth or leaf-size
// limit. At each node mtry features are tried first; the remaining features
// are searched only when none of those lowers impurity.
inline Tree fit_tree(const Dataset& data, std::size_t mtry, std::uint64_t seed) {
  if (data.empty()) throw domain_error("fit_tree: empty dataset");
  data.validate();
  const FeatureColumns cols(data);
  const std::vector<std::uint32_t> weights(data.size(), 1);
  return fit_tree(cols, data.labels, weights, mtry,
                  Rng(derive_seed(seed, {detail::tree_stream})));
}

} // namespace treecal
