#include "cropxai/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cropxai/artifact.hpp"
#include "cropxai/attribution.hpp"
#include "cropxai/counterfactual.hpp"
#include "cropxai/error.hpp"
#include "cropxai/evaluation.hpp"
#include "cropxai/grid_search.hpp"
#include "cropxai/importance.hpp"
#include "cropxai/lime.hpp"
#include "cropxai/model.hpp"
#include "cropxai/service.hpp"
#include "cropxai/shapley.hpp"

namespace cropxai {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Missing files and malformed arguments; reported with kExitUsage.
struct UsageError : Error {
  using Error::Error;
};

constexpr std::size_t kBackgroundSize = 100;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_file(const fs::path& path, const std::string& what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw UsageError(what + " not found: " + path.string());
}

Dataset read_data(const fs::path& path) {
  require_file(path, "data file");
  return load_dataset(path);
}

TrainedModel read_model(const fs::path& path) {
  require_file(path, "model artifact");
  return load_model_file(path);
}

fs::path default_background(const fs::path& model) {
  fs::path p = model;
  p += ".background.csv";
  return p;
}

// Seven comma-separated numbers, optionally followed by a label as in a
// CSV row.
FeatureVector parse_sample(const std::string& text) {
  std::vector<std::string> fields;
  std::stringstream ss(text);
  for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
  if (fields.size() != kNumFeatures && fields.size() != kNumFeatures + 1) {
    throw UsageError("--sample needs 7 comma-separated values, got " + std::to_string(fields.size()));
  }
  FeatureVector x{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    std::size_t used = 0;
    try {
      x[j] = std::stod(fields[j], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < fields[j].size() && std::isspace(static_cast<unsigned char>(fields[j][used]))) ++used;
    if (used == 0 || used != fields[j].size()) {
      throw UsageError("--sample value " + std::to_string(j + 1) + " is not a number: '" + fields[j] + "'");
    }
  }
  if (const std::string v = sample_violation(x); !v.empty()) throw InputError("--sample: " + v);
  return x;
}

int resolve_class(const TrainedModel& model, const std::string& name) {
  const auto c = find_class(model.classes(), name);
  if (!c) throw UsageError("unknown crop '" + name + "'");
  return *c;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// ---- train ------------------------------------------------------------

struct TrainArgs {
  std::string kind;
  std::string data;
  std::string out;
  std::string params;
  std::string created_at;
  std::string report_json;
  std::uint64_t seed = 42;
  double test_fraction = 0.3;
  bool grid = false;
  int grid_stride = 1;
  std::size_t folds = 5;
};

int run_train(const TrainArgs& a, std::ostream& out) {
  const ModelKind kind = parse_model_kind(a.kind);
  const Dataset data = read_data(a.data);
  const Split split = stratified_split(data, a.test_fraction, a.seed);

  Hyperparameters params = default_params(kind);
  if (!a.params.empty()) {
    json j;
    try {
      j = json::parse(a.params);
    } catch (const json::parse_error& e) {
      throw UsageError(std::string("--params is not valid JSON: ") + e.what());
    }
    params = hyperparameters_from_json(kind, j);
  }
  validate(params);

  if (a.grid) {
    const auto grid = paper_grid(kind, a.grid_stride);
    out << "grid search: " << grid.size() << " configurations, " << a.folds << "-fold\n";
    const GridSearchResult result = grid_search(grid, split.train, a.folds, a.seed);
    double best_score = 0.0;
    for (const auto& c : result.candidates) {
      if (c.params == result.best) {
        best_score = c.mean_accuracy;
        break;
      }
    }
    params = result.best;
    out << "best parameters: " << describe(params) << " (cv accuracy " << fixed(best_score, 2) << ")\n";
  }

  TrainedModel model = train_model(params, split.train, a.seed);
  model.set_created_at(a.created_at.empty() ? utc_now() : a.created_at);
  const ClassificationReport report = evaluate(model, split.test);

  out << to_string(kind) << " " << describe(params) << "\n";
  out << "train " << split.train.size() << " / test " << split.test.size() << " rows, seed " << a.seed << "\n\n";
  out << render_report(report) << "\n";
  out << render_comparison({{to_string(kind), report}});

  if (!a.out.empty()) {
    save_model(model, a.out);
    const fs::path bg = default_background(a.out);
    std::ofstream bg_out(bg);
    if (!bg_out) throw UsageError("cannot write " + bg.string());
    write_dataset(bg_out, stratified_sample(split.train, std::min(kBackgroundSize, split.train.size()), a.seed));
    out << "\nartifact written to " << a.out << "\nbackground set written to " << bg.string() << "\n";
  }
  if (!a.report_json.empty()) {
    std::ofstream rj(a.report_json);
    if (!rj) throw UsageError("cannot write " + a.report_json);
    json j = report_to_json(report);
    j["kind"] = to_string(kind);
    j["hyperparameters"] = hyperparameters_to_json(params);
    j["seed"] = a.seed;
    rj << j.dump(2) << "\n";
  }
  return kExitOk;
}

// ---- evaluate ---------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string data;
  double test_fraction = 0.3;
  std::optional<std::uint64_t> seed;
  bool all = false;
  std::string format = "text";
};

int run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const TrainedModel model = read_model(a.model);
  const Dataset data = read_data(a.data);
  // By default re-create the held-out split the artifact was trained next to.
  const Dataset test = a.all ? data : stratified_split(data, a.test_fraction, a.seed.value_or(model.info().seed)).test;
  const ClassificationReport report = evaluate(model, test);
  if (a.format == "json") {
    json j = report_to_json(report);
    j["kind"] = to_string(model.kind());
    j["rows"] = test.size();
    out << j.dump(2) << "\n";
  } else {
    out << to_string(model.kind()) << " on " << test.size() << " rows\n\n";
    out << render_report(report) << "\n" << render_comparison({{to_string(model.kind()), report}});
  }
  return kExitOk;
}

// ---- predict ----------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string sample;
  std::string format = "text";
  std::size_t top = 3;
};

int run_predict(const PredictArgs& a, std::ostream& out) {
  const TrainedModel model = read_model(a.model);
  const FeatureVector x = parse_sample(a.sample);
  const std::vector<double> p = model.predict_proba(x);
  const int predicted = argmax(p);
  if (a.format == "json") {
    json probs = json::array();
    for (std::size_t c = 0; c < p.size(); ++c) probs.push_back({{"class", model.classes()[c]}, {"probability", p[c]}});
    out << json{{"predicted_class", model.classes()[predicted]}, {"probabilities", probs},
                {"model_kind", to_string(model.kind())}}
               .dump(2)
        << "\n";
    return kExitOk;
  }
  out << model.classes()[predicted] << "\n";
  std::vector<std::size_t> order(p.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return p[l] > p[r]; });
  for (std::size_t i = 0; i < std::min(a.top, order.size()); ++i) {
    out << "  " << std::left << std::setw(14) << model.classes()[order[i]] << fixed(p[order[i]], 4) << "\n";
  }
  return kExitOk;
}

// ---- explain ----------------------------------------------------------

struct ExplainArgs {
  std::string model;
  std::string method;
  std::string sample;
  std::string target;
  std::string background;
  std::string data;
  std::string format = "text";
  std::uint64_t seed = 42;
  std::size_t samples = 2048;
  std::size_t repeats = 5;
  std::size_t perturbations = 5000;
  std::size_t count = 3;
  std::vector<std::string> immutable;
  bool all_mutable = false;
};

std::string attribution_header(const Attribution& a, const TrainedModel& model) {
  std::ostringstream os;
  os << to_string(a.method);
  if (a.target) os << " for " << model.classes()[*a.target];
  if (a.method == Method::permutation) {
    os << "  (baseline accuracy " << fixed(a.baseline, 4) << ")";
  } else if (a.method != Method::gain) {
    os << "  baseline " << fixed(a.baseline, 4) << "  output " << fixed(a.output, 4) << "  baseline+sum "
       << fixed(a.total(), 4);
  }
  os << "\n";
  return os.str();
}

std::vector<FeatureVector> read_background(const ExplainArgs& a) {
  const fs::path path = a.background.empty() ? default_background(a.model) : fs::path(a.background);
  const Dataset bg = read_data(path);
  if (bg.empty()) throw UsageError("background set is empty: " + path.string());
  return bg.feature_matrix();
}

int run_explain(const ExplainArgs& a, std::ostream& out) {
  const TrainedModel model = read_model(a.model);
  const auto& schema = model.schema();
  const auto& classes = model.classes();
  const bool as_json = a.format == "json";
  const bool global = a.method == "permutation" || a.method == "gain";

  std::optional<FeatureVector> x;
  if (!a.sample.empty()) x = parse_sample(a.sample);
  if (!global && !x) throw UsageError("--sample is required for --method " + a.method);
  std::optional<int> target;
  if (!a.target.empty()) target = resolve_class(model, a.target);

  auto local_target = [&] { return target.value_or(model.predict(*x)); };
  auto permutation = [&] {
    const fs::path path = !a.data.empty()      ? fs::path(a.data)
                          : !a.background.empty() ? fs::path(a.background)
                                                  : default_background(a.model);
    return permutation_importance(model, read_data(path), a.repeats, a.seed);
  };

  auto emit = [&](const Attribution& attr) {
    if (as_json) {
      json j = attribution_to_json(attr, schema, classes);
      j["seed"] = a.seed;
      out << j.dump(2) << "\n";
    } else {
      out << attribution_header(attr, model) << render_bars(attr, schema);
    }
    return kExitOk;
  };

  if (a.method == "counterfactual") {
    if (!target) throw UsageError("--target is required for --method counterfactual");
    CounterfactualConfig cfg;
    cfg.target = *target;
    cfg.count = a.count;
    cfg.seed = a.seed;
    if (a.all_mutable || !a.immutable.empty()) cfg.immutable.fill(false);
    for (const auto& name : a.immutable) {
      const auto j = schema.find(name);
      if (!j) throw UsageError("unknown feature '" + name + "' in --immutable");
      cfg.immutable[*j] = true;
    }
    const CounterfactualResult result = counterfactual_search(model, *x, cfg, model.info().stats);
    if (as_json) {
      json j = counterfactual_to_json(result, *x, schema, classes);
      out << j.dump(2) << "\n";
    } else {
      out << render_delta_table(result, *x, schema, classes);
    }
    return kExitOk;
  }

  if (a.method == "compare") {
    const int t = local_target();
    MethodComparison cmp;
    if (is_tree_model(model.kind())) {
      cmp.attributions.push_back(gain_importance(model));
      cmp.attributions.push_back(path_contributions(model, *x, t));
    } else {
      cmp.attributions.push_back(permutation());
    }
    cmp.attributions.push_back(shapley_exact(model, *x, read_background(a), t));
    LimeConfig lc;
    lc.seed = a.seed;
    lc.n_perturbations = a.perturbations;
    cmp.attributions.push_back(lime_explain(model, *x, model.info().stats, t, lc).attribution());
    if (as_json) {
      out << comparison_to_json(cmp, schema).dump(2) << "\n";
    } else {
      out << "prediction " << classes[model.predict(*x)] << ", explaining " << classes[t] << "\n"
          << render_method_comparison(cmp, schema);
    }
    return kExitOk;
  }

  switch (parse_method(a.method)) {
    case Method::permutation:
      return emit(permutation());
    case Method::gain:
      return emit(gain_importance(model));
    case Method::path:
      return emit(path_contributions(model, *x, local_target()));
    case Method::shapley_exact:
      return emit(shapley_exact(model, *x, read_background(a), local_target()));
    case Method::shapley_kernel:
      return emit(shapley_kernel(model, *x, read_background(a), local_target(), a.samples, a.seed));
    case Method::lime: {
      LimeConfig lc;
      lc.seed = a.seed;
      lc.n_perturbations = a.perturbations;
      const LimeExplanation e = lime_explain(model, *x, model.info().stats, local_target(), lc);
      if (as_json) {
        out << lime_to_json(e, schema, classes).dump(2) << "\n";
        return kExitOk;
      }
      out << "lime for " << classes[e.target] << "  probability " << fixed(e.prediction, 4) << "  surrogate "
          << fixed(e.local_prediction, 4) << "  fidelity "
          << (e.fidelity ? fixed(*e.fidelity, 3) : std::string("n/a")) << "\n";
      for (const auto& r : e.rules) {
        out << "  " << std::left << std::setw(36) << r.condition << std::right << std::setw(10)
            << fixed(r.weight, 4) << "\n";
      }
      return kExitOk;
    }
  }
  return kExitFailure;
}

// ---- serve ------------------------------------------------------------

struct ServeArgs {
  std::string model;
  std::string background;
  std::string host;
  int port = 0;
  std::string cors_origin;
  std::size_t body_limit = 0;
  std::size_t max_concurrency = 0;
  std::string log_level;
  std::uint64_t seed = 42;
};

int run_serve(const ServeArgs& a, const CLI::App& cmd, std::ostream& err) {
  ServiceConfig config;
  apply_env_overrides(config);
  // Flags given on the command line win over the environment.
  if (cmd.count("--model")) config.model_path = a.model;
  if (cmd.count("--background")) config.background_path = a.background;
  if (cmd.count("--host")) config.host = a.host;
  if (cmd.count("--port")) config.port = a.port;
  if (cmd.count("--cors-origin")) config.cors_origin = a.cors_origin;
  if (cmd.count("--body-limit")) config.body_limit = a.body_limit;
  if (cmd.count("--max-concurrency")) config.max_concurrency = a.max_concurrency;
  if (cmd.count("--log-level")) config.log_level = parse_log_level(a.log_level);
  config.default_seed = a.seed;
  if (config.model_path.empty()) throw UsageError("--model (or CROPXAI_MODEL) is required");
  require_file(config.model_path, "model artifact");

  Service service = Service::load(config, err);
  if (!service.listen()) {
    err << "error: cannot listen on " << service.config().host << ":" << service.config().port << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explainable crop recommendation: train, evaluate, explain and serve models."};
  app.name("cropxai");
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model, report held-out metrics, write an artifact");
  train_cmd->add_option("--kind", train.kind, "knn, rf, dt, svm, lgbm or mlp")->required();
  train_cmd->add_option("--data", train.data, "Crop CSV")->required();
  train_cmd->add_option("--out", train.out, "Artifact path (a background CSV is written next to it)");
  train_cmd->add_option("--seed", train.seed, "Split, search and training seed")->capture_default_str();
  train_cmd->add_option("--params", train.params, "JSON object overriding the default hyperparameters");
  train_cmd->add_flag("--grid", train.grid, "Grid-search the published parameter space first");
  train_cmd->add_option("--grid-stride", train.grid_stride, "Step through integer grid ranges")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--folds", train.folds, "Cross-validation folds for --grid")->capture_default_str();
  train_cmd->add_option("--test-fraction", train.test_fraction, "Held-out share")
      ->check(CLI::Range(0.01, 0.99))
      ->capture_default_str();
  train_cmd->add_option("--created-at", train.created_at, "Timestamp stored in the artifact");
  train_cmd->add_option("--report-json", train.report_json, "Also write the report as JSON");

  EvaluateArgs evaluate_args;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate an artifact on a CSV");
  eval_cmd->add_option("--model", evaluate_args.model, "Artifact")->required();
  eval_cmd->add_option("--data", evaluate_args.data, "Crop CSV")->required();
  auto* eval_seed_opt = eval_cmd->add_option("--seed", eval_seed, "Split seed (default: the artifact's)");
  eval_cmd->add_option("--test-fraction", evaluate_args.test_fraction, "Held-out share")
      ->check(CLI::Range(0.01, 0.99))
      ->capture_default_str();
  eval_cmd->add_flag("--all", evaluate_args.all, "Evaluate on every row instead of the held-out split");
  eval_cmd->add_option("--format", evaluate_args.format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Predict the crop for one sample");
  predict_cmd->add_option("--model", predict.model, "Artifact")->required();
  predict_cmd->add_option("--sample", predict.sample, "N,P,K,temperature,humidity,ph,rainfall")->required();
  predict_cmd->add_option("--top", predict.top, "Classes listed in text output")->capture_default_str();
  predict_cmd->add_option("--format", predict.format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();

  ExplainArgs explain;
  auto* explain_cmd = app.add_subcommand("explain", "Explain a model or one of its predictions");
  explain_cmd->add_option("--model", explain.model, "Artifact")->required();
  explain_cmd->add_option("--method", explain.method)
      ->required()
      ->check(CLI::IsMember(
          {"permutation", "gain", "path", "shap-exact", "shap-kernel", "lime", "counterfactual", "compare"}));
  explain_cmd->add_option("--sample", explain.sample, "N,P,K,temperature,humidity,ph,rainfall[,label]");
  explain_cmd->add_option("--target", explain.target, "Crop to explain or to reach (default: the prediction)");
  explain_cmd->add_option("--seed", explain.seed)->capture_default_str();
  explain_cmd->add_option("--background", explain.background, "Background CSV (default: <model>.background.csv)");
  explain_cmd->add_option("--data", explain.data, "Labeled CSV for permutation importance");
  explain_cmd->add_option("--samples", explain.samples, "Kernel SHAP coalitions")->capture_default_str();
  explain_cmd->add_option("--repeats", explain.repeats, "Permutation shuffles per feature")->capture_default_str();
  explain_cmd->add_option("--perturbations", explain.perturbations, "LIME perturbations")->capture_default_str();
  explain_cmd->add_option("--count", explain.count, "Counterfactuals requested")
      ->check(CLI::Range(1, 10))
      ->capture_default_str();
  explain_cmd->add_option("--immutable", explain.immutable, "Features the counterfactual may not change")
      ->delimiter(',');
  explain_cmd->add_flag("--all-mutable", explain.all_mutable, "Let the counterfactual change every feature");
  explain_cmd->add_option("--format", explain.format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP JSON API");
  serve_cmd->add_option("--model", serve.model, "Artifact (env CROPXAI_MODEL)");
  serve_cmd->add_option("--background", serve.background, "Background CSV (env CROPXAI_BACKGROUND)");
  serve_cmd->add_option("--host", serve.host, "Listen address (env CROPXAI_LISTEN=host:port)");
  serve_cmd->add_option("--port", serve.port)->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--cors-origin", serve.cors_origin, "Allowed browser origin");
  serve_cmd->add_option("--body-limit", serve.body_limit, "Maximum request body in bytes");
  serve_cmd->add_option("--max-concurrency", serve.max_concurrency, "Concurrent explanation jobs");
  serve_cmd->add_option("--log-level", serve.log_level)->check(CLI::IsMember({"debug", "info", "warn", "error"}));
  serve_cmd->add_option("--seed", serve.seed, "Default seed for stochastic explainers")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return run_train(train, out);
    if (*eval_cmd) {
      if (eval_seed_opt->count()) evaluate_args.seed = eval_seed;
      return run_evaluate(evaluate_args, out);
    }
    if (*predict_cmd) return run_predict(predict, out);
    if (*explain_cmd) return run_explain(explain, out);
    if (*serve_cmd) return run_serve(serve, *serve_cmd, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArtifactError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const RowError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsupportedModelError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUnsupported;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace cropxai
