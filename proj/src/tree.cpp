#include "cropxai/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cropxai/error.hpp"

namespace cropxai {

std::size_t Tree::leaf_for(const FeatureVector& x) const {
  std::size_t node = 0;
  while (!is_leaf(node)) {
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(feature[node])] <= threshold[node]
                                        ? left[node]
                                        : right[node]);
  }
  return node;
}

std::vector<std::size_t> Tree::decision_path(const FeatureVector& x) const {
  std::vector<std::size_t> path{0};
  std::size_t node = 0;
  while (!is_leaf(node)) {
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(feature[node])] <= threshold[node]
                                        ? left[node]
                                        : right[node]);
    path.push_back(node);
  }
  return path;
}

std::size_t Tree::add_leaf(std::span<const double> v, double w) {
  feature.push_back(-1);
  threshold.push_back(0.0);
  left.push_back(-1);
  right.push_back(-1);
  weight.push_back(w);
  gain.push_back(0.0);
  value.insert(value.end(), v.begin(), v.end());
  return feature.size() - 1;
}

void Tree::make_split(std::size_t node, int feat, double thr, std::size_t l, std::size_t r,
                      double g) {
  feature[node] = feat;
  threshold[node] = thr;
  left[node] = static_cast<int>(l);
  right[node] = static_cast<int>(r);
  gain[node] = g;
}

void Tree::propagate_values() {
  // Children are always created after their parent, so a reverse sweep
  // visits every child before its parent.
  for (std::size_t n = size(); n-- > 0;) {
    if (is_leaf(n)) continue;
    const auto l = static_cast<std::size_t>(left[n]);
    const auto r = static_cast<std::size_t>(right[n]);
    const double wl = weight[l];
    const double wr = weight[r];
    const double w = wl + wr;
    auto out = node_value(n);
    const auto vl = node_value(l);
    const auto vr = node_value(r);
    for (std::size_t k = 0; k < width; ++k) {
      out[k] = w > 0.0 ? (wl * vl[k] + wr * vr[k]) / w : 0.5 * (vl[k] + vr[k]);
    }
  }
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> d(size(), 0);
  std::size_t best = 0;
  for (std::size_t n = 0; n < size(); ++n) {
    if (is_leaf(n)) continue;
    d[static_cast<std::size_t>(left[n])] = d[n] + 1;
    d[static_cast<std::size_t>(right[n])] = d[n] + 1;
    best = std::max(best, d[n] + 1);
  }
  return best;
}

void Tree::validate() const {
  const std::size_t n = size();
  if (n == 0) throw ArtifactError("tree has no nodes");
  if (threshold.size() != n || left.size() != n || right.size() != n || weight.size() != n ||
      gain.size() != n || value.size() != n * width || width == 0) {
    throw ArtifactError("tree arrays have inconsistent lengths");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (feature[i] < 0) continue;
    if (feature[i] >= static_cast<int>(kNumFeatures)) {
      throw ArtifactError("tree node " + std::to_string(i) + " splits on an unknown feature");
    }
    // Children must come after the parent; this also rules out cycles.
    if (left[i] <= static_cast<int>(i) || right[i] <= static_cast<int>(i) ||
        left[i] >= static_cast<int>(n) || right[i] >= static_cast<int>(n)) {
      throw ArtifactError("tree node " + std::to_string(i) + " has invalid children");
    }
  }
}

namespace {

double impurity(std::span<const double> counts, double total, Criterion criterion) {
  if (total <= 0.0) return 0.0;
  double acc = 0.0;
  if (criterion == Criterion::gini) {
    for (double c : counts) {
      const double p = c / total;
      acc += p * p;
    }
    return 1.0 - acc;
  }
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      acc -= p * std::log2(p);
    }
  }
  return acc;
}

struct Candidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = -std::numeric_limits<double>::infinity();
};

class CartBuilder {
 public:
  CartBuilder(const std::vector<FeatureVector>& x, const std::vector<int>& y,
              const std::vector<double>& w, std::size_t n_classes, const CartOptions& opt,
              Rng& rng)
      : x_(x), y_(y), w_(w), k_(n_classes), opt_(opt), rng_(rng) {
    tree_.width = n_classes;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      if (opt.allowed[j]) features_.push_back(static_cast<int>(j));
    }
  }

  Tree build() {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if (w_[i] > 0.0) rows.push_back(i);
    }
    grow(rows, 0);
    tree_.propagate_values();
    return std::move(tree_);
  }

 private:
  std::size_t grow(std::vector<std::size_t>& rows, int depth) {
    std::vector<double> counts(k_, 0.0);
    double total = 0.0;
    for (std::size_t i : rows) {
      counts[static_cast<std::size_t>(y_[i])] += w_[i];
      total += w_[i];
    }
    std::vector<double> dist(k_, 0.0);
    for (std::size_t c = 0; c < k_; ++c) dist[c] = total > 0.0 ? counts[c] / total : 0.0;
    const std::size_t node = tree_.add_leaf(dist, total);

    const bool pure = std::count_if(counts.begin(), counts.end(),
                                    [](double c) { return c > 0.0; }) <= 1;
    if (pure || (opt_.max_depth >= 0 && depth >= opt_.max_depth) ||
        rows.size() < static_cast<std::size_t>(opt_.min_samples_split) ||
        rows.size() < 2 * static_cast<std::size_t>(opt_.min_samples_leaf)) {
      return node;
    }

    const Candidate best = find_split(rows, counts, total);
    if (best.feature < 0) return node;

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (std::size_t i : rows) {
      (x_[i][static_cast<std::size_t>(best.feature)] <= best.threshold ? left_rows : right_rows)
          .push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();
    const std::size_t l = grow(left_rows, depth + 1);
    const std::size_t r = grow(right_rows, depth + 1);
    tree_.make_split(node, best.feature, best.threshold, l, r, best.gain);
    return node;
  }

  std::vector<int> candidate_features() {
    const auto n_allowed = static_cast<int>(features_.size());
    if (opt_.max_features <= 0 || opt_.max_features >= n_allowed) return features_;
    std::vector<int> order = features_;
    rng_.shuffle(order);
    return order;
  }

  Candidate find_split(const std::vector<std::size_t>& rows, const std::vector<double>& counts,
                       double total) {
    const double parent = total * impurity(counts, total, opt_.criterion);
    const std::vector<int> order = candidate_features();
    const auto n_allowed = static_cast<int>(features_.size());
    const int budget =
        (opt_.max_features <= 0 || opt_.max_features >= n_allowed) ? n_allowed : opt_.max_features;

    Candidate best;
    int visited = 0;
    for (int f : order) {
      if (visited >= budget) break;
      const bool usable = opt_.splitter == Splitter::best
                              ? scan_best(rows, f, counts, total, parent, best)
                              : scan_random(rows, f, counts, total, parent, best);
      if (usable) ++visited;
    }
    return best;
  }

  // Returns false when the feature is constant in this node.
  bool scan_best(const std::vector<std::size_t>& rows, int f, const std::vector<double>& counts,
                 double total, double parent, Candidate& best) {
    const auto fj = static_cast<std::size_t>(f);
    sorted_ = rows;
    std::stable_sort(sorted_.begin(), sorted_.end(),
                     [&](std::size_t a, std::size_t b) { return x_[a][fj] < x_[b][fj]; });
    if (!(x_[sorted_.front()][fj] < x_[sorted_.back()][fj])) return false;

    left_.assign(k_, 0.0);
    right_ = counts;
    double wl = 0.0;
    const std::size_t n = sorted_.size();
    const auto min_leaf = static_cast<std::size_t>(opt_.min_samples_leaf);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t row = sorted_[i];
      const auto c = static_cast<std::size_t>(y_[row]);
      left_[c] += w_[row];
      right_[c] -= w_[row];
      wl += w_[row];
      const double xi = x_[row][fj];
      const double xn = x_[sorted_[i + 1]][fj];
      if (!(xi < xn)) continue;
      if (i + 1 < min_leaf || n - i - 1 < min_leaf) continue;
      const double wr = total - wl;
      const double g = parent - wl * impurity(left_, wl, opt_.criterion) -
                       wr * impurity(right_, wr, opt_.criterion);
      if (g > best.gain) {
        double thr = xi + (xn - xi) / 2.0;
        if (!(thr < xn)) thr = xi;
        best = {f, thr, g};
      }
    }
    return true;
  }

  bool scan_random(const std::vector<std::size_t>& rows, int f, const std::vector<double>& counts,
                   double total, double parent, Candidate& best) {
    const auto fj = static_cast<std::size_t>(f);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i : rows) {
      lo = std::min(lo, x_[i][fj]);
      hi = std::max(hi, x_[i][fj]);
    }
    if (!(lo < hi)) return false;
    double thr = rng_.uniform(lo, hi);
    if (thr >= hi) thr = lo;

    left_.assign(k_, 0.0);
    right_ = counts;
    double wl = 0.0;
    std::size_t nl = 0;
    for (std::size_t i : rows) {
      if (x_[i][fj] <= thr) {
        const auto c = static_cast<std::size_t>(y_[i]);
        left_[c] += w_[i];
        right_[c] -= w_[i];
        wl += w_[i];
        ++nl;
      }
    }
    const auto min_leaf = static_cast<std::size_t>(opt_.min_samples_leaf);
    if (nl < min_leaf || rows.size() - nl < min_leaf) return true;
    const double wr = total - wl;
    const double g = parent - wl * impurity(left_, wl, opt_.criterion) -
                     wr * impurity(right_, wr, opt_.criterion);
    if (g > best.gain) best = {f, thr, g};
    return true;
  }

  const std::vector<FeatureVector>& x_;
  const std::vector<int>& y_;
  const std::vector<double>& w_;
  std::size_t k_;
  const CartOptions& opt_;
  Rng& rng_;
  Tree tree_;
  std::vector<int> features_;
  std::vector<std::size_t> sorted_;
  std::vector<double> left_;
  std::vector<double> right_;
};

}  // namespace

Tree grow_classification_tree(const std::vector<FeatureVector>& x, const std::vector<int>& labels,
                              const std::vector<double>& weights, std::size_t n_classes,
                              const CartOptions& options, Rng& rng) {
  if (x.empty() || x.size() != labels.size() || x.size() != weights.size()) {
    throw InputError("tree training data is empty or misaligned");
  }
  return CartBuilder(x, labels, weights, n_classes, options, rng).build();
}

}  // namespace cropxai
