#include <algorithm>
#include <set>
#include <thread>

#include "cropxai/error.hpp"
#include "cropxai/learners.hpp"
#include "cropxai/parallel.hpp"

namespace cropxai {

TreeFit fit_tree(const LabeledMatrix& data, const DtParams& params, std::uint64_t seed,
                 const FeatureMask& allowed) {
  CartOptions opt;
  opt.criterion = params.criterion;
  opt.splitter = params.splitter;
  opt.max_depth = params.max_depth;
  opt.min_samples_split = params.min_samples_split;
  opt.allowed = allowed;
  Rng rng(seed);
  const std::vector<double> weights(data.x.size(), 1.0);
  return {grow_classification_tree(data.x, data.y, weights, data.n_classes, opt, rng)};
}

ForestFit fit_forest(const LabeledMatrix& data, const RfParams& params, std::uint64_t seed,
                     const FeatureMask& allowed) {
  CartOptions opt;
  opt.criterion = params.criterion;
  opt.max_depth = params.max_depth;
  opt.max_features = params.max_features;
  opt.allowed = allowed;

  const auto n_trees = static_cast<std::size_t>(params.n_estimators);
  ForestFit fit;
  fit.trees.resize(n_trees);
  fit.features_used.resize(n_trees);
  const std::size_t n = data.x.size();

  parallel_for(n_trees, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<double> weights(n, params.bootstrap ? 0.0 : 1.0);
    if (params.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) weights[rng.index(n)] += 1.0;
    }
    Tree tree = grow_classification_tree(data.x, data.y, weights, data.n_classes, opt, rng);
    std::set<int> used;
    for (int f : tree.feature) {
      if (f >= 0) used.insert(f);
    }
    fit.features_used[t].assign(used.begin(), used.end());
    fit.trees[t] = std::move(tree);
  });
  return fit;
}

void tree_proba(const Tree& tree, const FeatureVector& x, std::span<double> out) {
  const auto v = tree.node_value(tree.leaf_for(x));
  std::copy(v.begin(), v.end(), out.begin());
}

void forest_proba(const ForestFit& fit, const FeatureVector& x, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (const Tree& tree : fit.trees) {
    const auto v = tree.node_value(tree.leaf_for(x));
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += v[c];
  }
  const auto n = static_cast<double>(fit.trees.size());
  for (double& p : out) p /= n;
}

}  // namespace cropxai
