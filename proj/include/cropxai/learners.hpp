#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "cropxai/data.hpp"
#include "cropxai/hyperparameters.hpp"
#include "cropxai/tree.hpp"

namespace cropxai {

// Raw training matrix plus the set of classes actually present. Learners
// that work per class (boosting, SVM, MLP) only model `active` classes and
// report probability 0 for the rest.
struct LabeledMatrix {
  std::vector<FeatureVector> x;
  std::vector<int> y;
  std::size_t n_classes = 0;
  std::vector<int> active;

  static LabeledMatrix from(const Dataset& data);
  // y mapped into [0, active.size()).
  std::vector<int> local_labels() const;
};

using FeatureMask = std::array<bool, kNumFeatures>;
inline constexpr FeatureMask kAllFeatures{true, true, true, true, true, true, true};

// --- k-nearest neighbours -------------------------------------------------

struct KnnFit {
  Scaler scaler;
  std::vector<FeatureVector> points;  // scaled
  std::vector<int> labels;
  friend bool operator==(const KnnFit&, const KnnFit&) = default;
};

KnnFit fit_knn(const LabeledMatrix& data);
void knn_proba(const KnnFit& fit, const KnnParams& params, const FeatureVector& x,
               std::span<double> out);

// --- CART / random forest -------------------------------------------------

struct TreeFit {
  Tree tree;
  friend bool operator==(const TreeFit&, const TreeFit&) = default;
};

struct ForestFit {
  std::vector<Tree> trees;
  // Per tree, the sorted distinct features its splits use.
  std::vector<std::vector<int>> features_used;
  friend bool operator==(const ForestFit&, const ForestFit&) = default;
};

TreeFit fit_tree(const LabeledMatrix& data, const DtParams& params, std::uint64_t seed,
                 const FeatureMask& allowed);
ForestFit fit_forest(const LabeledMatrix& data, const RfParams& params, std::uint64_t seed,
                     const FeatureMask& allowed);
void tree_proba(const Tree& tree, const FeatureVector& x, std::span<double> out);
void forest_proba(const ForestFit& fit, const FeatureVector& x, std::span<double> out);

// --- histogram gradient boosting -----------------------------------------

// Upper bin edges per feature; value x falls into bin = #edges < x.
struct BinMapper {
  std::array<std::vector<double>, kNumFeatures> edges;
  static BinMapper fit(const std::vector<FeatureVector>& x, int max_bins);
  int bin(std::size_t feature, double value) const;
};

struct BoostFit {
  std::vector<int> active;
  std::vector<double> init_score;        // per active class
  std::vector<std::vector<Tree>> trees;  // [active class][round], width 1
  std::vector<double> loss_trace;        // training cross-entropy after each round
  friend bool operator==(const BoostFit&, const BoostFit&) = default;
};

BoostFit fit_boosting(const LabeledMatrix& data, const LgbmParams& params,
                      const FeatureMask& allowed);
// Raw per-active-class scores before the softmax.
void boost_margins(const BoostFit& fit, const FeatureVector& x, std::span<double> margins);

// --- one-vs-one SVM ------------------------------------------------------

// Binary machine for active classes (first, second); positive decision
// values favour `first`.
struct SvmPair {
  int first = 0;
  int second = 0;
  double bias = 0.0;
  FeatureVector weights{};      // linear kernel
  std::vector<int> support;     // rbf: indices into SvmFit::support
  std::vector<double> coef;     // rbf: alpha_i * y_i
  friend bool operator==(const SvmPair&, const SvmPair&) = default;
};

// Operates on raw (unscaled) features.
struct SvmFit {
  std::vector<int> active;
  Kernel kernel = Kernel::linear;
  double gamma = 0.0;
  std::vector<SvmPair> pairs;          // (a, b) for a < b, lexicographic
  std::vector<FeatureVector> support;  // rbf only
  friend bool operator==(const SvmFit&, const SvmFit&) = default;
};

// Deterministic: the pairwise problems are solved exactly.
SvmFit fit_svm(const LabeledMatrix& data, const SvmParams& params);
// Per active class: pairwise votes plus a tie-breaking confidence term
// in (-1/3, 1/3).
void svm_margins(const SvmFit& fit, const FeatureVector& x, std::span<double> margins);

// --- multilayer perceptron -----------------------------------------------

struct MlpNetwork {
  Activation activation = Activation::relu;
  std::vector<Eigen::MatrixXd> weights;    // fan_in x fan_out
  std::vector<Eigen::RowVectorXd> biases;  // 1 x fan_out

  // Softmax outputs for each row of `inputs`.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
  // Mean cross-entropy + alpha / (2 * batch) * sum of squared weights.
  // Fills `grad` (same shapes as this network) when non-null.
  double loss_and_gradient(const Eigen::MatrixXd& inputs, const std::vector<int>& labels,
                           double alpha, MlpNetwork* grad) const;
  std::size_t parameter_count() const;
  friend bool operator==(const MlpNetwork& a, const MlpNetwork& b);
};

struct MlpFit {
  Scaler scaler;
  std::vector<int> active;
  MlpNetwork network;
  std::vector<double> loss_curve;
  friend bool operator==(const MlpFit&, const MlpFit&) = default;
};

MlpNetwork init_network(std::size_t n_inputs, const std::vector<int>& hidden, std::size_t n_outputs,
                        Activation activation, std::uint64_t seed);
MlpFit fit_mlp(const LabeledMatrix& data, const MlpParams& params, std::uint64_t seed);
void mlp_proba_active(const MlpFit& fit, const FeatureVector& x, std::span<double> out);

// Softmax over `margins` scattered to `out` (size n_classes) via `active`.
void scatter_softmax(std::span<const double> margins, const std::vector<int>& active,
                     std::span<double> out);

}  // namespace cropxai
