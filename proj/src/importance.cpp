#include "cropxai/importance.hpp"

#include <algorithm>
#include <cmath>

#include "cropxai/error.hpp"
#include "cropxai/parallel.hpp"
#include "cropxai/rng.hpp"

namespace cropxai {

namespace {

std::size_t count_correct(const Classifier& model, const std::vector<FeatureVector>& x,
                          const std::vector<int>& y) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) correct += model.predict(x[i]) == y[i];
  return correct;
}

void check_target(const TrainedModel& model, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= model.num_classes()) {
    throw InputError("target class index " + std::to_string(target) + " out of range");
  }
}

// Adds the per-feature value deltas along the path of `x` through `tree`
// for output column `column`, scaled by `weight`. Returns the root value.
double accumulate_path(const Tree& tree, const FeatureVector& x, std::size_t column, double weight,
                       std::array<double, kNumFeatures>& contributions) {
  const auto path = tree.decision_path(x);
  for (std::size_t s = 1; s < path.size(); ++s) {
    const std::size_t parent = path[s - 1];
    const double delta = tree.node_value(path[s])[column] - tree.node_value(parent)[column];
    contributions[static_cast<std::size_t>(tree.feature[parent])] += weight * delta;
  }
  return tree.node_value(0)[column];
}

}  // namespace

Attribution permutation_importance(const Classifier& model, const Dataset& data, std::size_t repeats,
                                   std::uint64_t seed) {
  if (data.empty()) throw InputError("permutation importance needs data");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  const std::vector<FeatureVector> x = data.feature_matrix();
  std::vector<int> y;
  for (const Sample& s : data.samples) {
    if (!s.label) throw InputError("permutation importance needs labeled data");
    y.push_back(*s.label);
  }
  const auto n = static_cast<double>(x.size());
  const double base = static_cast<double>(count_correct(model, x, y)) / n;

  Attribution a;
  a.method = Method::permutation;
  a.baseline = base;
  a.output = base;
  parallel_for(kNumFeatures, [&](std::size_t j) {
    double drop = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
      Rng rng(derive_seed(seed, j * 1000003 + r));
      std::vector<std::size_t> order(x.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      std::vector<FeatureVector> shuffled = x;
      for (std::size_t i = 0; i < x.size(); ++i) shuffled[i][j] = x[order[i]][j];
      drop += base - static_cast<double>(count_correct(model, shuffled, y)) / n;
    }
    a.contributions[j] = drop / static_cast<double>(repeats);
  });
  a.metadata = {{"repeats", repeats}, {"seed", seed}, {"samples", x.size()}};
  return a;
}

Attribution gain_importance(const TrainedModel& model) {
  std::array<double, kNumFeatures> total{};
  auto add_tree = [&](const Tree& t) {
    for (std::size_t node = 0; node < t.size(); ++node) {
      if (!t.is_leaf(node)) total[static_cast<std::size_t>(t.feature[node])] += t.gain[node];
    }
  };
  std::size_t n_trees = 0;
  if (const auto* f = std::get_if<TreeFit>(&model.fit())) {
    add_tree(f->tree);
    n_trees = 1;
  } else if (const auto* f = std::get_if<ForestFit>(&model.fit())) {
    for (const Tree& t : f->trees) add_tree(t);
    n_trees = f->trees.size();
  } else if (const auto* f = std::get_if<BoostFit>(&model.fit())) {
    for (const auto& per_class : f->trees) {
      for (const Tree& t : per_class) add_tree(t);
      n_trees += per_class.size();
    }
  } else {
    throw UnsupportedModelError("gain importance needs a tree model, not " + to_string(model.kind()));
  }
  double sum = 0.0;
  for (double g : total) sum += g;
  Attribution a;
  a.method = Method::gain;
  for (std::size_t j = 0; j < kNumFeatures; ++j) a.contributions[j] = sum > 0.0 ? total[j] / sum : 0.0;
  a.output = sum > 0.0 ? 1.0 : 0.0;
  a.metadata = {{"trees", n_trees}, {"total_gain", sum}};
  return a;
}

Attribution path_contributions(const TrainedModel& model, const FeatureVector& x, int target) {
  check_target(model, target);
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("feature values must be finite");
  }
  Attribution a;
  a.method = Method::path;
  a.target = target;
  const auto column = static_cast<std::size_t>(target);

  if (const auto* f = std::get_if<TreeFit>(&model.fit())) {
    a.baseline = accumulate_path(f->tree, x, column, 1.0, a.contributions);
    a.output = model.predict_proba(x)[column];
    a.metadata = {{"space", "probability"}, {"trees", 1}};
  } else if (const auto* f = std::get_if<ForestFit>(&model.fit())) {
    const double w = 1.0 / static_cast<double>(f->trees.size());
    for (const Tree& t : f->trees) a.baseline += w * accumulate_path(t, x, column, w, a.contributions);
    a.output = model.predict_proba(x)[column];
    a.metadata = {{"space", "probability"}, {"trees", f->trees.size()}};
  } else if (const auto* f = std::get_if<BoostFit>(&model.fit())) {
    const auto it = std::find(f->active.begin(), f->active.end(), target);
    if (it == f->active.end()) {
      throw InputError("class " + model.classes()[column] + " was absent from the training data");
    }
    const auto k = static_cast<std::size_t>(it - f->active.begin());
    a.baseline = f->init_score[k];
    for (const Tree& t : f->trees[k]) a.baseline += accumulate_path(t, x, 0, 1.0, a.contributions);
    a.output = model.margins(x)[column];
    a.metadata = {{"space", "margin"}, {"trees", f->trees[k].size()}};
  } else {
    throw UnsupportedModelError("path contributions need a tree model, not " + to_string(model.kind()));
  }
  return a;
}

}  // namespace cropxai
