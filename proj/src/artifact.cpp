#include "cropxai/artifact.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cropxai/error.hpp"

namespace cropxai {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check(bool ok, const std::string& message) {
  if (!ok) throw ArtifactError(message);
}

json vec_to_json(const FeatureVector& v) { return json(std::vector<double>(v.begin(), v.end())); }

FeatureVector vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  check(v.size() == kNumFeatures, "feature vector must have 7 entries");
  FeatureVector out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

json tree_to_json(const Tree& t) {
  return {{"width", t.width},   {"feature", t.feature}, {"threshold", t.threshold},
          {"left", t.left},     {"right", t.right},     {"weight", t.weight},
          {"gain", t.gain},     {"value", t.value}};
}

Tree tree_from_json(const json& j, std::size_t width) {
  Tree t;
  t.width = j.at("width").get<std::size_t>();
  check(t.width == width, "tree width " + std::to_string(t.width) + ", expected " +
                              std::to_string(width));
  t.feature = j.at("feature").get<std::vector<int>>();
  t.threshold = j.at("threshold").get<std::vector<double>>();
  t.left = j.at("left").get<std::vector<int>>();
  t.right = j.at("right").get<std::vector<int>>();
  t.weight = j.at("weight").get<std::vector<double>>();
  t.gain = j.at("gain").get<std::vector<double>>();
  t.value = j.at("value").get<std::vector<double>>();
  t.validate();
  return t;
}

json scaler_to_json(const Scaler& s) {
  return {{"mean", vec_to_json(s.mean())}, {"scale", vec_to_json(s.scale())}};
}

Scaler scaler_from_json(const json& j) {
  const FeatureVector scale = vec_from_json(j.at("scale"));
  for (double v : scale) check(v > 0.0, "scaler scale must be positive");
  return Scaler(vec_from_json(j.at("mean")), scale);
}

std::vector<int> active_from_json(const json& j, std::size_t n_classes) {
  auto active = j.get<std::vector<int>>();
  check(active.size() >= 2, "at least two active classes required");
  for (std::size_t i = 0; i < active.size(); ++i) {
    check(active[i] >= 0 && static_cast<std::size_t>(active[i]) < n_classes,
          "active class index out of range");
    check(i == 0 || active[i] > active[i - 1], "active classes must be strictly increasing");
  }
  return active;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  check(rows > 0 && cols > 0 && static_cast<std::size_t>(rows * cols) == data.size(),
        "matrix shape does not match its data");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++];
  }
  return m;
}

json fit_to_json(const TrainedModel::Fit& fit) {
  return std::visit(
      overloaded{
          [](const KnnFit& f) -> json {
            json points = json::array();
            for (const auto& p : f.points) points.push_back(vec_to_json(p));
            return {{"points", points}, {"labels", f.labels}};
          },
          [](const ForestFit& f) -> json {
            json trees = json::array();
            for (const auto& t : f.trees) trees.push_back(tree_to_json(t));
            return {{"trees", trees}, {"features_used", f.features_used}};
          },
          [](const TreeFit& f) -> json { return {{"tree", tree_to_json(f.tree)}}; },
          [](const SvmFit& f) -> json {
            json pairs = json::array();
            for (const auto& p : f.pairs) {
              pairs.push_back({{"first", p.first},
                               {"second", p.second},
                               {"bias", p.bias},
                               {"weights", vec_to_json(p.weights)},
                               {"support", p.support},
                               {"coef", p.coef}});
            }
            json support = json::array();
            for (const auto& s : f.support) support.push_back(vec_to_json(s));
            return {{"active", f.active}, {"kernel", to_string(f.kernel)}, {"gamma", f.gamma},
                    {"pairs", pairs},     {"support", support}};
          },
          [](const BoostFit& f) -> json {
            json trees = json::array();
            for (const auto& per_class : f.trees) {
              json row = json::array();
              for (const auto& t : per_class) row.push_back(tree_to_json(t));
              trees.push_back(row);
            }
            return {{"active", f.active}, {"init_score", f.init_score}, {"trees", trees},
                    {"loss_trace", f.loss_trace}};
          },
          [](const MlpFit& f) -> json {
            json weights = json::array();
            json biases = json::array();
            for (const auto& w : f.network.weights) weights.push_back(matrix_to_json(w));
            for (const auto& b : f.network.biases) {
              biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
            }
            return {{"active", f.active}, {"weights", weights}, {"biases", biases},
                    {"loss_curve", f.loss_curve}};
          },
      },
      fit);
}

TrainedModel::Fit fit_from_json(const Hyperparameters& params, const json& j,
                                const std::optional<Scaler>& scaler, std::size_t n_classes) {
  const ModelKind kind = kind_of(params);
  auto need_scaler = [&]() {
    check(scaler.has_value(), to_string(kind) + " artifact is missing its scaler");
    return *scaler;
  };
  switch (kind) {
    case ModelKind::knn: {
      KnnFit f;
      f.scaler = need_scaler();
      for (const auto& p : j.at("points")) f.points.push_back(vec_from_json(p));
      f.labels = j.at("labels").get<std::vector<int>>();
      check(!f.points.empty() && f.points.size() == f.labels.size(),
            "knn points and labels differ in length");
      for (int y : f.labels) {
        check(y >= 0 && static_cast<std::size_t>(y) < n_classes, "knn label out of range");
      }
      return f;
    }
    case ModelKind::rf: {
      ForestFit f;
      for (const auto& t : j.at("trees")) f.trees.push_back(tree_from_json(t, n_classes));
      f.features_used = j.at("features_used").get<std::vector<std::vector<int>>>();
      check(!f.trees.empty(), "forest has no trees");
      check(f.features_used.size() == f.trees.size(), "features_used length mismatch");
      return f;
    }
    case ModelKind::dt:
      return TreeFit{tree_from_json(j.at("tree"), n_classes)};
    case ModelKind::svm: {
      SvmFit f;
      f.active = active_from_json(j.at("active"), n_classes);
      f.kernel = parse_kernel(j.at("kernel").get<std::string>());
      f.gamma = j.at("gamma").get<double>();
      for (const auto& s : j.at("support")) f.support.push_back(vec_from_json(s));
      const std::size_t k = f.active.size();
      for (const auto& p : j.at("pairs")) {
        SvmPair pair;
        pair.first = p.at("first").get<int>();
        pair.second = p.at("second").get<int>();
        pair.bias = p.at("bias").get<double>();
        pair.weights = vec_from_json(p.at("weights"));
        pair.support = p.at("support").get<std::vector<int>>();
        pair.coef = p.at("coef").get<std::vector<double>>();
        check(pair.first >= 0 && pair.first < pair.second && static_cast<std::size_t>(pair.second) < k,
              "svm pair indices out of range");
        check(pair.support.size() == pair.coef.size(), "svm support and coef differ in length");
        for (int s : pair.support) {
          check(s >= 0 && static_cast<std::size_t>(s) < f.support.size(), "svm support index out of range");
        }
        f.pairs.push_back(std::move(pair));
      }
      check(f.pairs.size() == k * (k - 1) / 2, "svm pair count does not match the class count");
      return f;
    }
    case ModelKind::lgbm: {
      BoostFit f;
      f.active = active_from_json(j.at("active"), n_classes);
      f.init_score = j.at("init_score").get<std::vector<double>>();
      for (const auto& per_class : j.at("trees")) {
        std::vector<Tree> row;
        for (const auto& t : per_class) row.push_back(tree_from_json(t, 1));
        f.trees.push_back(std::move(row));
      }
      f.loss_trace = j.at("loss_trace").get<std::vector<double>>();
      check(f.init_score.size() == f.active.size() && f.trees.size() == f.active.size(),
            "boosting arrays do not match the active class count");
      return f;
    }
    case ModelKind::mlp: {
      MlpFit f;
      f.scaler = need_scaler();
      f.active = active_from_json(j.at("active"), n_classes);
      f.network.activation = std::get<MlpParams>(params).activation;
      for (const auto& w : j.at("weights")) f.network.weights.push_back(matrix_from_json(w));
      for (const auto& b : j.at("biases")) {
        const auto v = b.get<std::vector<double>>();
        f.network.biases.emplace_back(
            Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      }
      f.loss_curve = j.at("loss_curve").get<std::vector<double>>();
      const auto& ws = f.network.weights;
      check(!ws.empty() && ws.size() == f.network.biases.size(), "mlp layer count mismatch");
      Eigen::Index fan_in = static_cast<Eigen::Index>(kNumFeatures);
      for (std::size_t l = 0; l < ws.size(); ++l) {
        check(ws[l].rows() == fan_in && f.network.biases[l].size() == ws[l].cols(),
              "mlp layer shapes do not chain");
        fan_in = ws[l].cols();
      }
      check(static_cast<std::size_t>(fan_in) == f.active.size(),
            "mlp output width does not match the active class count");
      return f;
    }
  }
  throw ArtifactError("unknown model kind");
}

template <class T>
void read_key(const json& j, std::set<std::string>& seen, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    out = it->get<T>();
    seen.insert(key);
  }
}

template <class E, class Parse>
void read_enum(const json& j, std::set<std::string>& seen, const char* key, E& out, Parse parse) {
  if (auto it = j.find(key); it != j.end()) {
    out = parse(it->get<std::string>());
    seen.insert(key);
  }
}

}  // namespace

json hyperparameters_to_json(const Hyperparameters& params) {
  return std::visit(
      overloaded{
          [](const KnnParams& p) -> json {
            return {{"n_neighbours", p.n_neighbours}, {"metric", to_string(p.metric)}};
          },
          [](const RfParams& p) -> json {
            return {{"max_depth", p.max_depth},
                    {"n_estimators", p.n_estimators},
                    {"criterion", to_string(p.criterion)},
                    {"bootstrap", p.bootstrap},
                    {"max_features", p.max_features}};
          },
          [](const DtParams& p) -> json {
            return {{"max_depth", p.max_depth},
                    {"criterion", to_string(p.criterion)},
                    {"splitter", to_string(p.splitter)},
                    {"min_samples_split", p.min_samples_split}};
          },
          [](const SvmParams& p) -> json {
            return {{"kernel", to_string(p.kernel)},
                    {"C", p.c},
                    {"gamma", p.gamma},
                    {"tol", p.tol},
                    {"max_iter", p.max_iter}};
          },
          [](const LgbmParams& p) -> json {
            return {{"num_leaves", p.num_leaves},
                    {"learning_rate", p.learning_rate},
                    {"n_estimators", p.n_estimators},
                    {"min_data_in_leaf", p.min_data_in_leaf},
                    {"max_bins", p.max_bins}};
          },
          [](const MlpParams& p) -> json {
            return {{"activation", to_string(p.activation)},
                    {"learning_rate", to_string(p.schedule)},
                    {"solver", to_string(p.solver)},
                    {"alpha", p.alpha},
                    {"hidden_layer_sizes", p.hidden_layer_sizes},
                    {"learning_rate_init", p.learning_rate_init},
                    {"batch_size", p.batch_size},
                    {"max_epochs", p.max_epochs},
                    {"n_iter_no_change", p.n_iter_no_change},
                    {"tol", p.tol}};
          },
      },
      params);
}

Hyperparameters hyperparameters_from_json(ModelKind kind, const json& j) {
  if (!j.is_object()) throw ConfigError("hyperparameters must be a JSON object");
  Hyperparameters params = default_params(kind);
  std::set<std::string> seen;
  try {
    std::visit(overloaded{
                   [&](KnnParams& p) {
                     read_key(j, seen, "n_neighbours", p.n_neighbours);
                     read_enum(j, seen, "metric", p.metric, parse_metric);
                   },
                   [&](RfParams& p) {
                     read_key(j, seen, "max_depth", p.max_depth);
                     read_key(j, seen, "n_estimators", p.n_estimators);
                     read_enum(j, seen, "criterion", p.criterion, parse_criterion);
                     read_key(j, seen, "bootstrap", p.bootstrap);
                     read_key(j, seen, "max_features", p.max_features);
                   },
                   [&](DtParams& p) {
                     read_key(j, seen, "max_depth", p.max_depth);
                     read_enum(j, seen, "criterion", p.criterion, parse_criterion);
                     read_enum(j, seen, "splitter", p.splitter, parse_splitter);
                     read_key(j, seen, "min_samples_split", p.min_samples_split);
                   },
                   [&](SvmParams& p) {
                     read_enum(j, seen, "kernel", p.kernel, parse_kernel);
                     read_key(j, seen, "C", p.c);
                     read_key(j, seen, "gamma", p.gamma);
                     read_key(j, seen, "tol", p.tol);
                     read_key(j, seen, "max_iter", p.max_iter);
                   },
                   [&](LgbmParams& p) {
                     read_key(j, seen, "num_leaves", p.num_leaves);
                     read_key(j, seen, "learning_rate", p.learning_rate);
                     read_key(j, seen, "n_estimators", p.n_estimators);
                     read_key(j, seen, "min_data_in_leaf", p.min_data_in_leaf);
                     read_key(j, seen, "max_bins", p.max_bins);
                   },
                   [&](MlpParams& p) {
                     read_enum(j, seen, "activation", p.activation, parse_activation);
                     read_enum(j, seen, "learning_rate", p.schedule, parse_schedule);
                     read_enum(j, seen, "solver", p.solver, parse_solver);
                     read_key(j, seen, "alpha", p.alpha);
                     read_key(j, seen, "hidden_layer_sizes", p.hidden_layer_sizes);
                     read_key(j, seen, "learning_rate_init", p.learning_rate_init);
                     read_key(j, seen, "batch_size", p.batch_size);
                     read_key(j, seen, "max_epochs", p.max_epochs);
                     read_key(j, seen, "n_iter_no_change", p.n_iter_no_change);
                     read_key(j, seen, "tol", p.tol);
                   },
               },
               params);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad hyperparameter value: ") + e.what());
  }
  for (const auto& item : j.items()) {
    if (!seen.count(item.key())) {
      throw ConfigError("unknown " + to_string(kind) + " hyperparameter '" + item.key() + "'");
    }
  }
  validate(params);
  return params;
}

json schema_to_json(const FeatureSchema& schema) {
  return {{"features", schema.names}, {"units", schema.units}, {"label", schema.label_name}};
}

json stats_to_json(const FeatureStats& stats) {
  json features = json::array();
  for (const auto& f : stats.features) {
    features.push_back({{"min", f.min},
                        {"max", f.max},
                        {"mean", f.mean},
                        {"std", f.std},
                        {"q1", f.q1},
                        {"median", f.median},
                        {"q3", f.q3},
                        {"mad", f.mad}});
  }
  return {{"count", stats.count}, {"features", features}};
}

FeatureStats stats_from_json(const json& j) {
  FeatureStats stats;
  stats.count = j.at("count").get<std::size_t>();
  const json& features = j.at("features");
  check(features.is_array() && features.size() == kNumFeatures, "stats must cover 7 features");
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const json& f = features[i];
    FeatureSummary& s = stats.features[i];
    s.min = f.at("min").get<double>();
    s.max = f.at("max").get<double>();
    s.mean = f.at("mean").get<double>();
    s.std = f.at("std").get<double>();
    s.q1 = f.at("q1").get<double>();
    s.median = f.at("median").get<double>();
    s.q3 = f.at("q3").get<double>();
    s.mad = f.at("mad").get<double>();
    check(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max,
          "stats quantiles out of order");
  }
  return stats;
}

json model_to_json(const TrainedModel& model) {
  const auto scaler = model.scaler();
  const TrainingInfo& info = model.info();
  return {{"format_version", kArtifactFormatVersion},
          {"kind", to_string(model.kind())},
          {"hyperparameters", hyperparameters_to_json(model.params())},
          {"class_names", model.classes()},
          {"schema", schema_to_json(model.schema())},
          {"scaler", scaler ? scaler_to_json(*scaler) : json(nullptr)},
          {"training_stats", stats_to_json(info.stats)},
          {"n_train", info.n_train},
          {"seed", info.seed},
          {"created_at", info.created_at},
          {"parameters", fit_to_json(model.fit())}};
}

TrainedModel model_from_json(const json& j) {
  try {
    check(j.is_object(), "artifact root must be a JSON object");
    const int version = j.at("format_version").get<int>();
    check(version == kArtifactFormatVersion,
          "unsupported artifact format_version " + std::to_string(version) + " (this reader handles " +
              std::to_string(kArtifactFormatVersion) + ")");
    const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
    const Hyperparameters params = hyperparameters_from_json(kind, j.at("hyperparameters"));

    auto classes = j.at("class_names").get<std::vector<std::string>>();
    check(classes.size() >= 2, "artifact needs at least two class names");

    FeatureSchema schema;
    const json& s = j.at("schema");
    const auto names = s.at("features").get<std::vector<std::string>>();
    const auto units = s.at("units").get<std::vector<std::string>>();
    check(names.size() == kNumFeatures && units.size() == kNumFeatures,
          "schema must list 7 features and units");
    std::copy(names.begin(), names.end(), schema.names.begin());
    std::copy(units.begin(), units.end(), schema.units.begin());
    schema.label_name = s.at("label").get<std::string>();
    schema.validate();

    std::optional<Scaler> scaler;
    if (!j.at("scaler").is_null()) scaler = scaler_from_json(j.at("scaler"));

    TrainingInfo info;
    info.stats = stats_from_json(j.at("training_stats"));
    info.n_train = j.at("n_train").get<std::size_t>();
    info.seed = j.at("seed").get<std::uint64_t>();
    info.created_at = j.at("created_at").get<std::string>();

    TrainedModel::Fit fit = fit_from_json(params, j.at("parameters"), scaler, classes.size());
    return TrainedModel(params, std::move(fit), std::move(classes), std::move(schema),
                        std::move(info));
  } catch (const ArtifactError&) {
    throw;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed artifact: ") + e.what());
  } catch (const Error& e) {
    throw ArtifactError(std::string("invalid artifact: ") + e.what());
  }
}

std::string save_model(const TrainedModel& model) { return model_to_json(model).dump(); }

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << save_model(model);
  if (!out) throw ArtifactError("failed writing " + path.string());
}

TrainedModel load_model(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ArtifactError(std::string("artifact is not valid JSON (truncated?): ") + e.what());
  }
  return model_from_json(j);
}

TrainedModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open artifact " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_model(buffer.str());
}

}  // namespace cropxai
