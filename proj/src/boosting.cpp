// Multiclass softmax gradient boosting with leaf-wise histogram trees.
#include <algorithm>
#include <cmath>
#include <limits>

#include "cropxai/error.hpp"
#include "cropxai/learners.hpp"

namespace cropxai {

BinMapper BinMapper::fit(const std::vector<FeatureVector>& x, int max_bins) {
  BinMapper m;
  std::vector<double> column(x.size());
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) column[i] = x[i][j];
    std::sort(column.begin(), column.end());
    std::vector<double> distinct = column;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    auto& edges = m.edges[j];
    const auto bins = static_cast<std::size_t>(max_bins);
    if (distinct.size() <= bins) {
      for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
        edges.push_back(distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0);
      }
    } else {
      // Quantile cut points, each moved to the midpoint before the next
      // distinct value so no training value sits on an edge.
      for (std::size_t b = 1; b < bins; ++b) {
        const double cut = column[b * column.size() / bins];
        const auto next = std::upper_bound(distinct.begin(), distinct.end(), cut);
        if (next == distinct.end()) break;
        const double edge = cut + (*next - cut) / 2.0;
        if (edges.empty() || edge > edges.back()) edges.push_back(edge);
      }
    }
  }
  return m;
}

int BinMapper::bin(std::size_t feature, double value) const {
  const auto& e = edges[feature];
  return static_cast<int>(std::lower_bound(e.begin(), e.end(), value) - e.begin());
}

namespace {

constexpr double kMinHessian = 1e-3;
constexpr double kEpsilon = 1e-15;
constexpr int kMaxHalvings = 30;

struct SplitInfo {
  int feature = -1;
  int bin = -1;
  double gain = 0.0;
};

struct Leaf {
  std::size_t node;
  std::vector<std::size_t> rows;
  double g = 0.0;
  double h = 0.0;
  SplitInfo split;
};

class LeafwiseGrower {
 public:
  LeafwiseGrower(const BinMapper& bins, const std::vector<std::array<std::uint8_t, kNumFeatures>>& binned,
                 const LgbmParams& params, const FeatureMask& allowed)
      : bins_(bins), binned_(binned), params_(params), allowed_(allowed) {}

  Tree grow(const std::vector<double>& g, const std::vector<double>& h) {
    Tree tree;
    tree.width = 1;
    std::vector<Leaf> leaves;
    Leaf root;
    root.rows.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) root.rows[i] = i;
    root.node = new_leaf(tree, root.rows, g, h, root.g, root.h);
    root.split = best_split(root, g, h);
    leaves.push_back(std::move(root));

    while (static_cast<int>(leaves.size()) < params_.num_leaves) {
      std::size_t pick = leaves.size();
      double best_gain = 0.0;
      for (std::size_t l = 0; l < leaves.size(); ++l) {
        if (leaves[l].split.feature >= 0 && leaves[l].split.gain > best_gain) {
          best_gain = leaves[l].split.gain;
          pick = l;
        }
      }
      if (pick == leaves.size()) break;

      Leaf parent = std::move(leaves[pick]);
      const auto f = static_cast<std::size_t>(parent.split.feature);
      Leaf lo;
      Leaf hi;
      for (std::size_t i : parent.rows) {
        (binned_[i][f] <= parent.split.bin ? lo.rows : hi.rows).push_back(i);
      }
      lo.node = new_leaf(tree, lo.rows, g, h, lo.g, lo.h);
      hi.node = new_leaf(tree, hi.rows, g, h, hi.g, hi.h);
      tree.make_split(parent.node, parent.split.feature,
                      bins_.edges[f][static_cast<std::size_t>(parent.split.bin)], lo.node, hi.node,
                      parent.split.gain);
      lo.split = best_split(lo, g, h);
      hi.split = best_split(hi, g, h);
      leaves[pick] = std::move(lo);
      leaves.insert(leaves.begin() + static_cast<long>(pick) + 1, std::move(hi));
    }
    tree.propagate_values();
    return tree;
  }

 private:
  std::size_t new_leaf(Tree& tree, const std::vector<std::size_t>& rows,
                       const std::vector<double>& g, const std::vector<double>& h, double& sum_g,
                       double& sum_h) const {
    sum_g = 0.0;
    sum_h = 0.0;
    for (std::size_t i : rows) {
      sum_g += g[i];
      sum_h += h[i];
    }
    const double out = -params_.learning_rate * sum_g / (sum_h + kEpsilon);
    return tree.add_leaf(std::span<const double>(&out, 1), static_cast<double>(rows.size()));
  }

  SplitInfo best_split(const Leaf& leaf, const std::vector<double>& g,
                       const std::vector<double>& h) {
    SplitInfo best;
    const auto min_leaf = static_cast<std::size_t>(params_.min_data_in_leaf);
    if (leaf.rows.size() < 2 * min_leaf) return best;
    const double parent_score = leaf.g * leaf.g / (leaf.h + kEpsilon);

    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      if (!allowed_[f]) continue;
      const std::size_t n_bins = bins_.edges[f].size() + 1;
      if (n_bins < 2) continue;
      hist_g_.assign(n_bins, 0.0);
      hist_h_.assign(n_bins, 0.0);
      hist_n_.assign(n_bins, 0);
      for (std::size_t i : leaf.rows) {
        const std::uint8_t b = binned_[i][f];
        hist_g_[b] += g[i];
        hist_h_[b] += h[i];
        ++hist_n_[b];
      }
      double gl = 0.0;
      double hl = 0.0;
      std::size_t nl = 0;
      for (std::size_t b = 0; b + 1 < n_bins; ++b) {
        gl += hist_g_[b];
        hl += hist_h_[b];
        nl += hist_n_[b];
        if (hist_n_[b] == 0) continue;
        const std::size_t nr = leaf.rows.size() - nl;
        if (nl < min_leaf) continue;
        if (nr < min_leaf) break;
        const double gr = leaf.g - gl;
        const double hr = leaf.h - hl;
        if (hl < kMinHessian || hr < kMinHessian) continue;
        const double gain = gl * gl / hl + gr * gr / hr - parent_score;
        if (gain > best.gain) best = {static_cast<int>(f), static_cast<int>(b), gain};
      }
    }
    return best;
  }

  const BinMapper& bins_;
  const std::vector<std::array<std::uint8_t, kNumFeatures>>& binned_;
  const LgbmParams& params_;
  const FeatureMask& allowed_;
  std::vector<double> hist_g_;
  std::vector<double> hist_h_;
  std::vector<std::size_t> hist_n_;
};

double cross_entropy(const std::vector<std::vector<double>>& margins, const std::vector<int>& y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const auto& m = margins[i];
    const double top = *std::max_element(m.begin(), m.end());
    double z = 0.0;
    for (double v : m) z += std::exp(v - top);
    loss += top + std::log(z) - m[static_cast<std::size_t>(y[i])];
  }
  return loss / static_cast<double>(margins.size());
}

}  // namespace

BoostFit fit_boosting(const LabeledMatrix& data, const LgbmParams& params,
                      const FeatureMask& allowed) {
  if (params.max_bins > 255) throw ConfigError("max_bins must be <= 255");
  const std::size_t n = data.x.size();
  const std::size_t k = data.active.size();
  const std::vector<int> y = data.local_labels();

  const BinMapper bins = BinMapper::fit(data.x, params.max_bins);
  std::vector<std::array<std::uint8_t, kNumFeatures>> binned(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      binned[i][j] = static_cast<std::uint8_t>(bins.bin(j, data.x[i][j]));
    }
  }

  BoostFit fit;
  fit.active = data.active;
  fit.trees.resize(k);
  fit.init_score.resize(k);
  std::vector<double> counts(k, 0.0);
  for (int c : y) counts[static_cast<std::size_t>(c)] += 1.0;
  for (std::size_t c = 0; c < k; ++c) fit.init_score[c] = std::log(counts[c] / static_cast<double>(n));

  std::vector<std::vector<double>> margins(n, fit.init_score);
  std::vector<std::vector<double>> prob(n, std::vector<double>(k));
  std::vector<double> g(n);
  std::vector<double> h(n);
  LeafwiseGrower grower(bins, binned, params, allowed);
  double prev_loss = cross_entropy(margins, y);

  for (int round = 0; round < params.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double top = *std::max_element(margins[i].begin(), margins[i].end());
      double z = 0.0;
      for (std::size_t c = 0; c < k; ++c) z += (prob[i][c] = std::exp(margins[i][c] - top));
      for (double& p : prob[i]) p /= z;
    }
    std::vector<Tree> round_trees(k);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = prob[i][c];
        g[i] = p - (y[i] == static_cast<int>(c) ? 1.0 : 0.0);
        h[i] = p * (1.0 - p);
      }
      round_trees[c] = grower.grow(g, h);
    }
    // Newton steps from leaves with a tiny hessian can overshoot. Halve the
    // round's step until the training loss does not rise.
    std::vector<std::vector<double>> step(n, std::vector<double>(k));
    for (std::size_t c = 0; c < k; ++c) {
      const Tree& tree = round_trees[c];
      for (std::size_t i = 0; i < n; ++i) step[i][c] = tree.node_value(tree.leaf_for(data.x[i]))[0];
    }
    double scale = 1.0;
    std::vector<std::vector<double>> next = margins;
    double loss = prev_loss;
    for (int attempt = 0; attempt < kMaxHalvings; ++attempt, scale /= 2.0) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) next[i][c] = margins[i][c] + scale * step[i][c];
      }
      loss = cross_entropy(next, y);
      if (loss <= prev_loss) break;
    }
    if (loss > prev_loss) {
      scale = 0.0;
      loss = prev_loss;
    } else {
      margins = std::move(next);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (scale != 1.0) {
        for (double& v : round_trees[c].value) v *= scale;
      }
      fit.trees[c].push_back(std::move(round_trees[c]));
    }
    fit.loss_trace.push_back(loss);
    prev_loss = loss;
  }
  return fit;
}

void boost_margins(const BoostFit& fit, const FeatureVector& x, std::span<double> margins) {
  for (std::size_t c = 0; c < fit.active.size(); ++c) {
    double m = fit.init_score[c];
    for (const Tree& tree : fit.trees[c]) m += tree.node_value(tree.leaf_for(x))[0];
    margins[c] = m;
  }
}

}  // namespace cropxai
