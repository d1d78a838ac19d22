#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cropxai/data.hpp"
#include "cropxai/hyperparameters.hpp"
#include "cropxai/learners.hpp"

namespace cropxai {

// Anything that maps a raw feature vector to one score per class. The
// explainers work against this interface so they can be exercised with
// hand-written models as well as trained ones.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::size_t num_classes() const = 0;
  virtual void predict_proba(const FeatureVector& x, std::span<double> out) const = 0;

  std::vector<double> predict_proba(const FeatureVector& x) const;
  // Argmax of predict_proba; ties go to the lowest class index.
  int predict(const FeatureVector& x) const;
};

int argmax(std::span<const double> values);

struct TrainingInfo {
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  FeatureStats stats;  // training-set statistics (LIME bins, counterfactual ranges)
  std::string created_at;
};

struct TrainOptions {
  // Features the tree learners may split on. Other kinds reject a mask.
  FeatureMask allowed = kAllFeatures;
};

class TrainedModel final : public Classifier {
 public:
  // Alternative order matches ModelKind.
  using Fit = std::variant<KnnFit, ForestFit, TreeFit, SvmFit, BoostFit, MlpFit>;

  TrainedModel(Hyperparameters params, Fit fit, std::vector<std::string> classes,
               FeatureSchema schema, TrainingInfo info);

  // Wraps a hand-built classification tree (leaf values = class distributions).
  static TrainedModel from_tree(Tree tree, std::vector<std::string> classes, TrainingInfo info = {});

  ModelKind kind() const { return kind_of(params_); }
  const Hyperparameters& params() const { return params_; }
  const Fit& fit() const { return fit_; }
  const std::vector<std::string>& classes() const { return classes_; }
  const FeatureSchema& schema() const { return schema_; }
  const TrainingInfo& info() const { return info_; }
  void set_created_at(std::string stamp) { info_.created_at = std::move(stamp); }

  // Scaler applied before KNN/MLP; empty for the other kinds.
  std::optional<Scaler> scaler() const;

  std::size_t num_classes() const override { return classes_.size(); }
  using Classifier::predict_proba;
  // Throws InputError on non-finite features.
  void predict_proba(const FeatureVector& x, std::span<double> out) const override;

  // Pre-softmax scores per class for LGBM and SVM; -inf for classes the
  // model never saw. Throws UnsupportedModelError for other kinds.
  std::vector<double> margins(const FeatureVector& x) const;

 private:
  Hyperparameters params_;
  Fit fit_;
  std::vector<std::string> classes_;
  FeatureSchema schema_;
  TrainingInfo info_;
};

TrainedModel train_model(const Hyperparameters& params, const Dataset& train, std::uint64_t seed,
                         const TrainOptions& options = {});

inline TrainedModel train_model(ModelKind kind, const Dataset& train, std::uint64_t seed) {
  return train_model(default_params(kind), train, seed);
}

std::string predict_label(const TrainedModel& model, const FeatureVector& x);

}  // namespace cropxai
