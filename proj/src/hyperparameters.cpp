#include "cropxai/hyperparameters.hpp"

#include <sstream>

#include "cropxai/error.hpp"

namespace cropxai {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void bad_value(std::string_view what, std::string_view value) {
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(value) + "'");
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::knn: return "knn";
    case ModelKind::rf: return "rf";
    case ModelKind::dt: return "dt";
    case ModelKind::svm: return "svm";
    case ModelKind::lgbm: return "lgbm";
    case ModelKind::mlp: return "mlp";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : kAllModelKinds) {
    if (to_string(k) == name) return k;
  }
  bad_value("model kind", name);
}

bool is_tree_model(ModelKind kind) {
  return kind == ModelKind::rf || kind == ModelKind::dt || kind == ModelKind::lgbm;
}

ModelKind kind_of(const Hyperparameters& params) { return static_cast<ModelKind>(params.index()); }

Hyperparameters default_params(ModelKind kind) {
  switch (kind) {
    case ModelKind::knn: return KnnParams{};
    case ModelKind::rf: return RfParams{};
    case ModelKind::dt: return DtParams{};
    case ModelKind::svm: return SvmParams{};
    case ModelKind::lgbm: return LgbmParams{};
    case ModelKind::mlp: return MlpParams{};
  }
  throw ConfigError("unknown model kind");
}

void validate(const Hyperparameters& params) {
  std::visit(overloaded{
                 [](const KnnParams& p) { require(p.n_neighbours >= 1, "n_neighbours must be >= 1"); },
                 [](const RfParams& p) {
                   require(p.max_depth >= 1, "max_depth must be >= 1");
                   require(p.n_estimators >= 1, "n_estimators must be >= 1");
                   require(p.max_features >= 0, "max_features must be >= 0");
                 },
                 [](const DtParams& p) {
                   require(p.max_depth >= 1, "max_depth must be >= 1");
                   require(p.min_samples_split >= 2, "min_samples_split must be >= 2");
                 },
                 [](const SvmParams& p) {
                   require(p.c > 0.0, "C must be > 0");
                   require(p.kernel == Kernel::linear || p.gamma > 0.0, "gamma must be > 0");
                   require(p.tol > 0.0, "tol must be > 0");
                   require(p.max_iter >= 1, "max_iter must be >= 1");
                 },
                 [](const LgbmParams& p) {
                   require(p.num_leaves >= 2, "num_leaves must be >= 2");
                   require(p.learning_rate > 0.0, "learning_rate must be > 0");
                   require(p.n_estimators >= 1, "n_estimators must be >= 1");
                   require(p.min_data_in_leaf >= 1, "min_data_in_leaf must be >= 1");
                   require(p.max_bins >= 2, "max_bins must be >= 2");
                 },
                 [](const MlpParams& p) {
                   require(p.alpha >= 0.0, "alpha must be >= 0");
                   require(!p.hidden_layer_sizes.empty(), "hidden_layer_sizes must be non-empty");
                   for (int h : p.hidden_layer_sizes) require(h >= 1, "hidden layer sizes must be >= 1");
                   require(p.learning_rate_init > 0.0, "learning_rate_init must be > 0");
                   require(p.batch_size >= 1, "batch_size must be >= 1");
                   require(p.max_epochs >= 1, "max_epochs must be >= 1");
                   require(p.n_iter_no_change >= 1, "n_iter_no_change must be >= 1");
                 },
             },
             params);
}

std::string describe(const Hyperparameters& params) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const KnnParams& p) {
                   os << "n_neighbours=" << p.n_neighbours << " metric=" << to_string(p.metric);
                 },
                 [&](const RfParams& p) {
                   os << "max_depth=" << p.max_depth << " n_estimators=" << p.n_estimators
                      << " criterion=" << to_string(p.criterion);
                   if (!p.bootstrap) os << " bootstrap=false";
                   if (p.max_features != 2) os << " max_features=" << p.max_features;
                 },
                 [&](const DtParams& p) {
                   os << "max_depth=" << p.max_depth << " criterion=" << to_string(p.criterion)
                      << " splitter=" << to_string(p.splitter)
                      << " min_samples_split=" << p.min_samples_split;
                 },
                 [&](const SvmParams& p) {
                   os << "kernel=" << to_string(p.kernel) << " C=" << p.c;
                   if (p.kernel == Kernel::rbf) os << " gamma=" << p.gamma;
                 },
                 [&](const LgbmParams& p) {
                   os << "num_leaves=" << p.num_leaves << " learning_rate=" << p.learning_rate
                      << " n_estimators=" << p.n_estimators;
                 },
                 [&](const MlpParams& p) {
                   os << "activation=" << to_string(p.activation)
                      << " learning_rate=" << to_string(p.schedule)
                      << " solver=" << to_string(p.solver) << " alpha=" << p.alpha
                      << " hidden_layer_sizes=(";
                   for (std::size_t i = 0; i < p.hidden_layer_sizes.size(); ++i) {
                     os << (i ? "," : "") << p.hidden_layer_sizes[i];
                   }
                   os << ")";
                 },
             },
             params);
  return os.str();
}

std::string to_string(Criterion c) { return c == Criterion::gini ? "gini" : "entropy"; }
std::string to_string(Splitter s) { return s == Splitter::best ? "best" : "random"; }
std::string to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "cityblock"; }
std::string to_string(Kernel k) { return k == Kernel::linear ? "linear" : "rbf"; }
std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
std::string to_string(LearningRateSchedule s) {
  return s == LearningRateSchedule::constant ? "constant" : "adaptive";
}
std::string to_string(Solver s) { return s == Solver::sgd ? "sgd" : "adam"; }

Criterion parse_criterion(std::string_view s) {
  if (s == "gini") return Criterion::gini;
  if (s == "entropy") return Criterion::entropy;
  bad_value("criterion", s);
}

Splitter parse_splitter(std::string_view s) {
  if (s == "best") return Splitter::best;
  if (s == "random") return Splitter::random;
  bad_value("splitter", s);
}

Metric parse_metric(std::string_view s) {
  if (s == "euclidean" || s == "euclidian") return Metric::euclidean;
  if (s == "cityblock" || s == "manhattan") return Metric::cityblock;
  bad_value("metric", s);
}

Kernel parse_kernel(std::string_view s) {
  if (s == "linear") return Kernel::linear;
  if (s == "rbf") return Kernel::rbf;
  bad_value("kernel", s);
}

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  bad_value("activation", s);
}

LearningRateSchedule parse_schedule(std::string_view s) {
  if (s == "constant") return LearningRateSchedule::constant;
  if (s == "adaptive") return LearningRateSchedule::adaptive;
  bad_value("learning rate schedule", s);
}

Solver parse_solver(std::string_view s) {
  if (s == "sgd") return Solver::sgd;
  if (s == "adam") return Solver::adam;
  bad_value("solver", s);
}

}  // namespace cropxai
