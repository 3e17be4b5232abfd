#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "treecal/csv.hpp"
#include "treecal/dataset.hpp"
#include "treecal/error.hpp"
#include "treecal/parallel.hpp"
#include "treecal/random.hpp"
#include "treecal/tree.hpp"

namespace treecal {

struct ForestParams {
  std::size_t mtry = 1;
  std::size_t n_trees = 500;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct Forest {
  std::vector<Tree> trees;
  std::size_t n_features = 0;
  std::size_t mtry = 1;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  std::size_t n_trees() const noexcept { return trees.size(); }

  friend bool operator==(const Forest&, const Forest&) = default;
};

namespace detail {

inline constexpr std::uint64_t bootstrap_stream = 0x626f6f74ULL;

// Per-row multiplicity of n draws with replacement.
inline std::vector<std::uint32_t> bootstrap_weights(std::size_t n, Rng& rng) {
  std::vector<std::uint32_t> w(n, 0);
  for (std::size_t i = 0; i < n; ++i) ++w[rng.below(n)];
  return w;
}

} // namespace detail

// Tree t draws its bootstrap sample and split features from streams derived
// from (seed, t), so the result does not depend on `threads`.
inline Forest fit_forest(const Dataset& data, const ForestParams& params, std::size_t threads = 1) {
  if (data.empty()) throw domain_error("fit_forest: empty dataset");
  data.validate();
  detail::check_mtry(params.mtry, data.n_features);
  if (params.n_trees < 1) throw domain_error("fit_forest: n_trees must be >= 1");

  const FeatureColumns cols(data);
  Forest forest;
  forest.n_features = data.n_features;
  forest.mtry = params.mtry;
  forest.bootstrap = params.bootstrap;
  forest.seed = params.seed;
  forest.trees.resize(params.n_trees);
  const std::vector<std::uint32_t> unit(params.bootstrap ? 0 : data.size(), 1);

  parallel_for(params.n_trees, threads, [&](std::size_t t) {
    if (params.bootstrap) {
      Rng boot(derive_seed(params.seed, {detail::bootstrap_stream, t}));
      const auto weights = detail::bootstrap_weights(data.size(), boot);
      forest.trees[t] = fit_tree(cols, data.labels, weights, params.mtry,
                                 Rng(derive_seed(params.seed, {detail::tree_stream, t})));
    } else {
      forest.trees[t] = fit_tree(cols, data.labels, unit, params.mtry,
                                 Rng(derive_seed(params.seed, {detail::tree_stream, t})));
    }
  });
  return forest;
}

inline Forest fit_forest(const Dataset& data, std::size_t mtry, std::size_t n_trees, bool bootstrap,
                         std::uint64_t seed, std::size_t threads = 1) {
  return fit_forest(data, ForestParams{mtry, n_trees, bootstrap, seed}, threads);
}

// Mean of the trees' leaf positive-fractions, summed in tree order.
inline double predict_forest(const Forest& forest, std::span<const double> x) {
  if (x.size() != forest.n_features)
    throw dimension_error("predict_forest: expected " + std::to_string(forest.n_features) +
                          " features, got " + std::to_string(x.size()));
  if (forest.trees.empty()) throw domain_error("predict_forest: forest has no trees");
  double sum = 0.0;
  for (const auto& tree : forest.trees) sum += tree.nodes()[tree.leaf_index(x.data())].pos_fraction;
  return sum / static_cast<double>(forest.trees.size());
}

// Batch prediction. Rows are processed in blocks, tree by tree, which keeps
// one tree hot in cache; every row still accumulates in tree order so the
// result is bit-identical to predict_forest.
inline std::vector<double> predict_forest(const Forest& forest, const Dataset& data,
                                          std::size_t threads = 1) {
  if (data.n_features != forest.n_features)
    throw dimension_error("predict_forest: dataset has " + std::to_string(data.n_features) +
                          " features, forest expects " + std::to_string(forest.n_features));
  if (forest.trees.empty()) throw domain_error("predict_forest: forest has no trees");
  const std::size_t n = data.size();
  std::vector<double> out(n, 0.0);
  constexpr std::size_t block = 2048;
  const std::size_t blocks = (n + block - 1) / block;
  const double n_trees = static_cast<double>(forest.trees.size());
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t lo = b * block, hi = std::min(n, lo + block);
    for (const auto& tree : forest.trees) {
      const auto& nodes = tree.nodes();
      for (std::size_t i = lo; i < hi; ++i)
        out[i] += nodes[tree.leaf_index(data.features.data() + i * data.n_features)].pos_fraction;
    }
    for (std::size_t i = lo; i < hi; ++i) out[i] /= n_trees;
  });
  return out;
}

inline std::vector<double> predict_tree(const Tree& tree, const Dataset& data) {
  if (data.n_features != tree.n_features())
    throw dimension_error("predict_tree: dataset width does not match tree");
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out[i] = tree.nodes()[tree.leaf_index(data.features.data() + i * data.n_features)].pos_fraction;
  return out;
}

// Text model format, one record per line:
//
//   treecal-forest 1
//   n_features <d>
//   mtry <m>
//   bootstrap <0|1>
//   seed <s>
//   n_trees <t>
//   tree <index> <node count>
//   <preorder index> split <feature> <threshold> <right child> <pos_fraction> <n_samples>
//   <preorder index> leaf <pos_fraction> <n_samples>
//   ...
//   end
//
// Feature indices are 0-based; left children are implicit (index + 1).
inline void write_forest(std::ostream& os, const Forest& forest) {
  os << "treecal-forest 1\n"
     << "n_features " << forest.n_features << '\n'
     << "mtry " << forest.mtry << '\n'
     << "bootstrap " << (forest.bootstrap ? 1 : 0) << '\n'
     << "seed " << forest.seed << '\n'
     << "n_trees " << forest.trees.size() << '\n';
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const auto& nodes = forest.trees[t].nodes();
    os << "tree " << t << ' ' << nodes.size() << '\n';
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      if (n.is_leaf()) {
        os << i << " leaf " << format_double(n.pos_fraction) << ' ' << n.n_samples << '\n';
      } else {
        os << i << " split " << n.feature << ' ' << format_double(n.threshold) << ' ' << n.right
           << ' ' << format_double(n.pos_fraction) << ' ' << n.n_samples << '\n';
      }
    }
  }
  os << "end\n";
}

inline Forest read_forest(std::istream& is) {
  std::size_t line_no = 0;
  std::string line;
  auto next = [&]() -> std::istringstream {
    if (!std::getline(is, line))
      throw parse_error("forest: unexpected end of file after line " + std::to_string(line_no));
    ++line_no;
    return std::istringstream(line);
  };
  auto fail = [&](const std::string& what) -> parse_error {
    return parse_error("forest: " + what + " (line " + std::to_string(line_no) + ")");
  };
  auto expect_key = [&](const char* key) {
    auto ss = next();
    std::string k;
    std::uint64_t v;
    if (!(ss >> k >> v) || k != key) throw fail(std::string("expected '") + key + " <value>'");
    return v;
  };
  auto read_real = [&](std::istringstream& ss) {
    std::string tok;
    double v;
    if (!(ss >> tok) || !parse_double(tok, v)) throw fail("bad number");
    return v;
  };

  {
    auto ss = next();
    std::string magic;
    int version = 0;
    if (!(ss >> magic >> version) || magic != "treecal-forest" || version != 1)
      throw fail("not a treecal-forest v1 file");
  }
  Forest forest;
  forest.n_features = expect_key("n_features");
  forest.mtry = expect_key("mtry");
  forest.bootstrap = expect_key("bootstrap") != 0;
  forest.seed = expect_key("seed");
  const auto n_trees = expect_key("n_trees");
  for (std::uint64_t t = 0; t < n_trees; ++t) {
    auto ss = next();
    std::string key;
    std::uint64_t index, count;
    if (!(ss >> key >> index >> count) || key != "tree" || index != t)
      throw fail("expected 'tree " + std::to_string(t) + " <node count>'");
    std::vector<TreeNode> nodes(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      auto ns = next();
      std::uint64_t pos;
      std::string kind;
      if (!(ns >> pos >> kind) || pos != i) throw fail("node index out of sequence");
      TreeNode& n = nodes[i];
      if (kind == "leaf") {
        n.pos_fraction = read_real(ns);
        if (!(ns >> n.n_samples)) throw fail("bad leaf record");
      } else if (kind == "split") {
        std::int64_t feature;
        std::uint64_t right;
        if (!(ns >> feature)) throw fail("bad split record");
        n.threshold = read_real(ns);
        if (!(ns >> right)) throw fail("bad split record");
        n.pos_fraction = read_real(ns);
        if (!(ns >> n.n_samples)) throw fail("bad split record");
        if (feature < 0 || static_cast<std::uint64_t>(feature) >= forest.n_features)
          throw fail("split feature out of range");
        if (right <= i + 1 || right >= count) throw fail("right child index out of range");
        n.feature = static_cast<std::int32_t>(feature);
        n.right = static_cast<std::uint32_t>(right);
      } else {
        throw fail("unknown node kind '" + kind + "'");
      }
    }
    if (count == 0 || (nodes.back().feature >= 0)) throw fail("tree must end with a leaf");
    forest.trees.emplace_back(forest.n_features, std::move(nodes));
  }
  {
    auto ss = next();
    std::string k;
    if (!(ss >> k) || k != "end") throw fail("expected 'end'");
  }
  return forest;
}

inline void save_forest(const std::string& path, const Forest& forest) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_forest(os, forest);
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline Forest load_forest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "' for reading");
  return read_forest(is);
}

} // namespace treecal
