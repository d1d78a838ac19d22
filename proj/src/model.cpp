#include "cropxai/model.hpp"

#include <cmath>
#include <limits>

#include "cropxai/error.hpp"

namespace cropxai {

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

std::vector<double> Classifier::predict_proba(const FeatureVector& x) const {
  std::vector<double> out(num_classes());
  predict_proba(x, out);
  return out;
}

int Classifier::predict(const FeatureVector& x) const { return argmax(predict_proba(x)); }

TrainedModel::TrainedModel(Hyperparameters params, Fit fit, std::vector<std::string> classes,
                           FeatureSchema schema, TrainingInfo info)
    : params_(std::move(params)),
      fit_(std::move(fit)),
      classes_(std::move(classes)),
      schema_(std::move(schema)),
      info_(std::move(info)) {
  if (params_.index() != fit_.index()) {
    throw ConfigError("hyperparameters and fitted parameters belong to different model kinds");
  }
}

TrainedModel TrainedModel::from_tree(Tree tree, std::vector<std::string> classes,
                                     TrainingInfo info) {
  if (tree.width != classes.size()) throw ConfigError("tree width does not match class count");
  tree.validate();
  return TrainedModel(DtParams{}, TreeFit{std::move(tree)}, std::move(classes),
                      FeatureSchema::crop(), std::move(info));
}

std::optional<Scaler> TrainedModel::scaler() const {
  if (const auto* f = std::get_if<KnnFit>(&fit_)) return f->scaler;
  if (const auto* f = std::get_if<MlpFit>(&fit_)) return f->scaler;
  return std::nullopt;
}

void TrainedModel::predict_proba(const FeatureVector& x, std::span<double> out) const {
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("feature values must be finite");
  }
  if (out.size() != classes_.size()) throw InputError("output span has the wrong size");
  switch (kind()) {
    case ModelKind::knn:
      knn_proba(std::get<KnnFit>(fit_), std::get<KnnParams>(params_), x, out);
      return;
    case ModelKind::rf:
      forest_proba(std::get<ForestFit>(fit_), x, out);
      return;
    case ModelKind::dt:
      tree_proba(std::get<TreeFit>(fit_).tree, x, out);
      return;
    case ModelKind::svm: {
      const auto& f = std::get<SvmFit>(fit_);
      std::vector<double> m(f.active.size());
      svm_margins(f, x, m);
      scatter_softmax(m, f.active, out);
      return;
    }
    case ModelKind::lgbm: {
      const auto& f = std::get<BoostFit>(fit_);
      std::vector<double> m(f.active.size());
      boost_margins(f, x, m);
      scatter_softmax(m, f.active, out);
      return;
    }
    case ModelKind::mlp: {
      const auto& f = std::get<MlpFit>(fit_);
      std::vector<double> m(f.active.size());
      mlp_proba_active(f, x, m);
      scatter_softmax(m, f.active, out);
      return;
    }
  }
}

std::vector<double> TrainedModel::margins(const FeatureVector& x) const {
  const std::vector<int>* active = nullptr;
  std::vector<double> local;
  if (const auto* f = std::get_if<BoostFit>(&fit_)) {
    local.resize(f->active.size());
    boost_margins(*f, x, local);
    active = &f->active;
  } else if (const auto* f = std::get_if<SvmFit>(&fit_)) {
    local.resize(f->active.size());
    svm_margins(*f, x, local);
    active = &f->active;
  } else {
    throw UnsupportedModelError(to_string(kind()) + " has no margin output");
  }
  std::vector<double> out(classes_.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < active->size(); ++k) out[static_cast<std::size_t>((*active)[k])] = local[k];
  return out;
}

TrainedModel train_model(const Hyperparameters& params, const Dataset& train, std::uint64_t seed,
                         const TrainOptions& options) {
  validate(params);
  if (train.empty()) throw DegenerateDataError("training set is empty");
  const LabeledMatrix data = LabeledMatrix::from(train);
  if (data.active.size() < 2) {
    throw DegenerateDataError("training set needs at least 2 classes, found " +
                              std::to_string(data.active.size()));
  }
  const ModelKind kind = kind_of(params);
  if (options.allowed != kAllFeatures && !is_tree_model(kind)) {
    throw ConfigError("feature masks are only supported by tree models");
  }

  TrainingInfo info;
  info.seed = seed;
  info.n_train = train.size();
  info.stats = compute_stats(train);

  TrainedModel::Fit fit = [&]() -> TrainedModel::Fit {
    switch (kind) {
      case ModelKind::knn: return fit_knn(data);
      case ModelKind::rf: return fit_forest(data, std::get<RfParams>(params), seed, options.allowed);
      case ModelKind::dt: return fit_tree(data, std::get<DtParams>(params), seed, options.allowed);
      case ModelKind::svm: return fit_svm(data, std::get<SvmParams>(params));
      case ModelKind::lgbm: return fit_boosting(data, std::get<LgbmParams>(params), options.allowed);
      case ModelKind::mlp: return fit_mlp(data, std::get<MlpParams>(params), seed);
    }
    throw ConfigError("unknown model kind");
  }();
  return TrainedModel(params, std::move(fit), train.classes, train.schema, std::move(info));
}

std::string predict_label(const TrainedModel& model, const FeatureVector& x) {
  return model.classes()[static_cast<std::size_t>(model.predict(x))];
}

}  // namespace cropxai
