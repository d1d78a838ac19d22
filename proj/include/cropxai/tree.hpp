#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cropxai/data.hpp"
#include "cropxai/rng.hpp"

namespace cropxai {

// Flat binary tree. Node 0 is the root. A node with feature < 0 is a leaf.
// Samples with x[feature] <= threshold go left.
//
// `value` holds `width` numbers per node: a class distribution for
// classification trees, a single margin for boosting trees. For internal
// nodes it is the weight-averaged value of the two children, so the change
// along any root-to-leaf path telescopes to the leaf value.
struct Tree {
  std::size_t width = 1;
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> weight;
  std::vector<double> gain;
  std::vector<double> value;

  std::size_t size() const { return feature.size(); }
  bool is_leaf(std::size_t node) const { return feature[node] < 0; }

  std::span<const double> node_value(std::size_t node) const {
    return {value.data() + node * width, width};
  }
  std::span<double> node_value(std::size_t node) { return {value.data() + node * width, width}; }

  std::size_t leaf_for(const FeatureVector& x) const;
  // Root first, leaf last.
  std::vector<std::size_t> decision_path(const FeatureVector& x) const;

  std::size_t add_leaf(std::span<const double> v, double w);
  void make_split(std::size_t node, int feat, double thr, std::size_t l, std::size_t r, double g);

  // Recomputes every internal value as the weight-averaged value of its
  // children (bottom-up). Leaves are untouched.
  void propagate_values();

  std::size_t depth() const;
  void validate() const;

  friend bool operator==(const Tree&, const Tree&) = default;
};

enum class Criterion { gini, entropy };
enum class Splitter { best, random };

struct CartOptions {
  Criterion criterion = Criterion::gini;
  Splitter splitter = Splitter::best;
  int max_depth = -1;  // < 0: unbounded
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  // Features examined per split; 0 or >= 7 means all, in natural order.
  int max_features = 0;
  std::array<bool, kNumFeatures> allowed{true, true, true, true, true, true, true};
};

// CART classification tree. `labels` are dense class indices in
// [0, n_classes); `weights` are per-row multiplicities (bootstrap counts).
// Leaf values are weighted class frequencies.
Tree grow_classification_tree(const std::vector<FeatureVector>& x, const std::vector<int>& labels,
                              const std::vector<double>& weights, std::size_t n_classes,
                              const CartOptions& options, Rng& rng);

}  // namespace cropxai
