#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cropxai/tree.hpp"

namespace cropxai {

enum class ModelKind { knn, rf, dt, svm, lgbm, mlp };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::knn, ModelKind::rf,   ModelKind::dt,
                                               ModelKind::svm, ModelKind::lgbm, ModelKind::mlp};

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
bool is_tree_model(ModelKind kind);

enum class Metric { euclidean, cityblock };
enum class Kernel { linear, rbf };
enum class Activation { relu, tanh };
enum class LearningRateSchedule { constant, adaptive };
enum class Solver { sgd, adam };

// Defaults are the best parameters reported for each model kind.
struct KnnParams {
  int n_neighbours = 11;
  Metric metric = Metric::cityblock;
  friend bool operator==(const KnnParams&, const KnnParams&) = default;
};

struct RfParams {
  int max_depth = 9;
  int n_estimators = 89;
  Criterion criterion = Criterion::entropy;
  bool bootstrap = true;
  int max_features = 2;  // floor(sqrt(7)); 0 = all features
  friend bool operator==(const RfParams&, const RfParams&) = default;
};

struct DtParams {
  int max_depth = 131;
  Criterion criterion = Criterion::gini;
  Splitter splitter = Splitter::best;
  int min_samples_split = 4;
  friend bool operator==(const DtParams&, const DtParams&) = default;
};

struct SvmParams {
  Kernel kernel = Kernel::linear;
  double c = 0.01;
  double gamma = 0.1;  // rbf only
  double tol = 1e-3;   // stopping tolerance on the KKT violation
  int max_iter = 10000000;
  friend bool operator==(const SvmParams&, const SvmParams&) = default;
};

struct LgbmParams {
  int num_leaves = 5;
  double learning_rate = 0.1;
  int n_estimators = 43;
  int min_data_in_leaf = 5;
  int max_bins = 63;
  friend bool operator==(const LgbmParams&, const LgbmParams&) = default;
};

struct MlpParams {
  Activation activation = Activation::relu;
  LearningRateSchedule schedule = LearningRateSchedule::constant;
  Solver solver = Solver::adam;
  double alpha = 0.5;
  std::vector<int> hidden_layer_sizes{10, 30, 50, 25};
  double learning_rate_init = 1e-3;
  int batch_size = 32;
  int max_epochs = 500;
  int n_iter_no_change = 20;
  double tol = 1e-5;
  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Alternative index matches the ModelKind enumerator.
using Hyperparameters = std::variant<KnnParams, RfParams, DtParams, SvmParams, LgbmParams, MlpParams>;

ModelKind kind_of(const Hyperparameters& params);
Hyperparameters default_params(ModelKind kind);
// Throws ConfigError when a field is out of range.
void validate(const Hyperparameters& params);

// One-line "key=value" rendering used in reports and logs.
std::string describe(const Hyperparameters& params);

std::string to_string(Criterion c);
std::string to_string(Splitter s);
std::string to_string(Metric m);
std::string to_string(Kernel k);
std::string to_string(Activation a);
std::string to_string(LearningRateSchedule s);
std::string to_string(Solver s);

Criterion parse_criterion(std::string_view s);
Splitter parse_splitter(std::string_view s);
Metric parse_metric(std::string_view s);
Kernel parse_kernel(std::string_view s);
Activation parse_activation(std::string_view s);
LearningRateSchedule parse_schedule(std::string_view s);
Solver parse_solver(std::string_view s);

}  // namespace cropxai
