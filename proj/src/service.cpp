#include "cropxai/service.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "cropxai/artifact.hpp"
#include "cropxai/error.hpp"
#include "cropxai/importance.hpp"
#include "cropxai/lime.hpp"
#include "cropxai/shapley.hpp"

namespace cropxai {

using nlohmann::json;

namespace {

struct FieldError {
  std::string field;
  std::string message;
};

// Thrown while parsing a request; becomes a 400 (or 422) response.
struct RequestError {
  int status;
  std::string message;
  std::vector<FieldError> fields;
};

HttpResult error_result(int status, const std::string& message, const std::vector<FieldError>& fields = {}) {
  json f = json::array();
  for (const auto& e : fields) f.push_back({{"field", e.field}, {"message", e.message}});
  return {status, {{"error", message}, {"fields", f}}};
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return os.str();
}

std::string level_name(LogLevel l) {
  switch (l) {
    case LogLevel::debug: return "debug";
    case LogLevel::info: return "info";
    case LogLevel::warn: return "warn";
    case LogLevel::error: return "error";
  }
  return "info";
}

FeatureVector parse_features(const json& request) {
  const FeatureSchema& schema = FeatureSchema::crop();
  const auto it = request.find("features");
  if (it == request.end()) throw RequestError{400, "invalid request", {{"features", "is required"}}};
  std::vector<FieldError> errors;
  FeatureVector x{};
  auto check_value = [&](const json& v, std::size_t j, const std::string& field) {
    if (!v.is_number()) {
      errors.push_back({field, "must be a number"});
      return;
    }
    x[j] = v.get<double>();
    if (std::string bad = feature_violation(j, x[j]); !bad.empty()) errors.push_back({field, bad});
  };
  if (it->is_array()) {
    if (it->size() != kNumFeatures) {
      throw RequestError{400,
                         "invalid request",
                         {{"features", "expected " + std::to_string(kNumFeatures) + " values, got " +
                                           std::to_string(it->size())}}};
    }
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      check_value((*it)[j], j, "features[" + std::to_string(j) + "]");
    }
  } else if (it->is_object()) {
    std::array<bool, kNumFeatures> seen{};
    for (const auto& item : it->items()) {
      const auto j = schema.find(item.key());
      if (!j) {
        errors.push_back({"features." + item.key(), "unknown feature"});
        continue;
      }
      seen[*j] = true;
      check_value(item.value(), *j, "features." + schema.names[*j]);
    }
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      if (!seen[j]) errors.push_back({"features." + schema.names[j], "is required"});
    }
  } else {
    throw RequestError{400, "invalid request", {{"features", "must be an array of 7 numbers or an object"}}};
  }
  if (!errors.empty()) throw RequestError{400, "invalid request", errors};
  return x;
}

std::uint64_t parse_seed(const json& request, std::uint64_t fallback) {
  const auto it = request.find("seed");
  if (it == request.end() || it->is_null()) return fallback;
  if (!it->is_number_unsigned()) {
    throw RequestError{400, "invalid request", {{"seed", "must be a non-negative integer"}}};
  }
  return it->get<std::uint64_t>();
}

std::optional<int> parse_target(const json& request, const std::vector<std::string>& classes, bool required) {
  const auto it = request.find("target_class");
  if (it == request.end() || it->is_null()) {
    if (required) throw RequestError{400, "invalid request", {{"target_class", "is required"}}};
    return std::nullopt;
  }
  if (!it->is_string()) throw RequestError{400, "invalid request", {{"target_class", "must be a crop name"}}};
  const auto c = find_class(classes, it->get<std::string>());
  if (!c) {
    throw RequestError{422, "unknown target class", {{"target_class", "unknown crop '" + it->get<std::string>() + "'"}}};
  }
  return c;
}

std::size_t parse_count(const json& request, const char* key, std::size_t fallback, std::size_t lo, std::size_t hi) {
  const auto it = request.find(key);
  if (it == request.end() || it->is_null()) return fallback;
  if (!it->is_number_unsigned() || it->get<std::size_t>() < lo || it->get<std::size_t>() > hi) {
    throw RequestError{400,
                       "invalid request",
                       {{key, "must be an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"}}};
  }
  return it->get<std::size_t>();
}

json probabilities_json(const std::vector<double>& p, const std::vector<std::string>& classes) {
  json out = json::array();
  for (std::size_t c = 0; c < classes.size(); ++c) out.push_back({{"class", classes[c]}, {"probability", p[c]}});
  return out;
}

}  // namespace

LogLevel parse_log_level(std::string_view s) {
  if (s == "debug") return LogLevel::debug;
  if (s == "info") return LogLevel::info;
  if (s == "warn" || s == "warning") return LogLevel::warn;
  if (s == "error") return LogLevel::error;
  throw ConfigError("unknown log level '" + std::string(s) + "'");
}

void JsonLogger::log(LogLevel level, const std::string& event, json fields) {
  if (level < level_) return;
  fields["ts"] = utc_now();
  fields["level"] = level_name(level);
  fields["event"] = event;
  const std::string line = fields.dump();
  std::lock_guard lock(mutex_);
  *out_ << line << '\n' << std::flush;
}

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw ConfigError("port must be in [0, 65535]");
  if (model_path.empty()) throw ConfigError("a model artifact path is required");
  if (body_limit < 64) throw ConfigError("body limit must be at least 64 bytes");
  if (max_concurrency < 1) throw ConfigError("max concurrency must be >= 1");
  if (kernel_samples < 2 * kNumFeatures + 2) throw ConfigError("kernel sample count too small");
}

void apply_env_overrides(ServiceConfig& config) {
  if (const char* listen = std::getenv("CROPXAI_LISTEN"); listen && *listen) {
    const std::string value = listen;
    const auto colon = value.rfind(':');
    try {
      if (colon == std::string::npos) {
        config.port = std::stoi(value);
      } else {
        if (colon > 0) config.host = value.substr(0, colon);
        config.port = std::stoi(value.substr(colon + 1));
      }
    } catch (const std::exception&) {
      throw ConfigError("CROPXAI_LISTEN must look like host:port, got '" + value + "'");
    }
  }
  if (const char* model = std::getenv("CROPXAI_MODEL"); model && *model) config.model_path = model;
  if (const char* bg = std::getenv("CROPXAI_BACKGROUND"); bg && *bg) config.background_path = bg;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < length; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

class Service::Slot {
 public:
  explicit Slot(Service& s) : s_(s) {
    std::unique_lock lock(s_.slots_mutex_);
    s_.slots_cv_.wait(lock, [&] { return s_.busy_ < s_.config_.max_concurrency; });
    ++s_.busy_;
  }
  ~Slot() {
    {
      std::lock_guard lock(s_.slots_mutex_);
      --s_.busy_;
    }
    s_.slots_cv_.notify_one();
  }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  Service& s_;
};

Service::Service(TrainedModel model, Dataset background, std::string model_hash, ServiceConfig config,
                 std::ostream& log_sink)
    : model_(std::move(model)),
      background_(std::move(background)),
      background_x_(background_.feature_matrix()),
      hash_(std::move(model_hash)),
      config_(std::move(config)),
      logger_(log_sink, config_.log_level) {
  if (background_.empty()) throw ConfigError("background set is empty");
  if (background_.classes != model_.classes()) throw ConfigError("background classes differ from the model's");
  if (is_tree_model(model_.kind())) {
    importance_ = gain_importance(model_);
  } else {
    importance_ = permutation_importance(model_, background_, config_.permutation_repeats, config_.default_seed);
  }
}

Service Service::load(ServiceConfig config, std::ostream& log_sink) {
  config.validate();
  std::ifstream in(config.model_path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open artifact " + config.model_path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string bytes = buffer.str();
  TrainedModel model = load_model(bytes);
  if (config.background_path.empty()) {
    config.background_path = config.model_path;
    config.background_path += ".background.csv";
  }
  Dataset background = load_dataset(config.background_path);
  return Service(std::move(model), std::move(background), sha256_hex(bytes), std::move(config), log_sink);
}

HttpResult Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  try {
    if (path == "/v1/health") {
      if (method != "GET") return error_result(405, "use GET");
      return {200, {{"status", "ok"}, {"model_kind", to_string(model_.kind())}}};
    }
    if (path == "/v1/model") {
      if (method != "GET") return error_result(405, "use GET");
      return model_info();
    }
    const bool known = path == "/v1/predict" || path == "/v1/explain" || path == "/v1/counterfactual";
    if (!known) return error_result(404, "no route for " + path);
    if (method != "POST") return error_result(405, "use POST");

    json request;
    try {
      request = json::parse(body);
    } catch (const json::parse_error& e) {
      return error_result(400, "request body is not valid JSON", {{"body", e.what()}});
    }
    if (!request.is_object()) return error_result(400, "request body must be a JSON object");

    if (path == "/v1/predict") return predict(request);
    Slot slot(*this);
    if (path == "/v1/explain") return explain(request);
    return counterfactual(request);
  } catch (const RequestError& e) {
    return error_result(e.status, e.message, e.fields);
  } catch (const UnsupportedModelError& e) {
    return error_result(422, e.what());
  } catch (const InputError& e) {
    return error_result(400, e.what());
  } catch (const ConfigError& e) {
    return error_result(400, e.what());
  } catch (const std::exception& e) {
    logger_.log(LogLevel::error, "internal_error", {{"path", path}, {"what", e.what()}});
    return error_result(500, "internal error");
  }
}

HttpResult Service::predict(const json& request) {
  const FeatureVector x = parse_features(request);
  const std::vector<double> p = model_.predict_proba(x);
  const int best = argmax(p);
  return {200,
          {{"predicted_class", model_.classes()[static_cast<std::size_t>(best)]},
           {"probabilities", probabilities_json(p, model_.classes())},
           {"model_kind", to_string(model_.kind())},
           {"model_hash", hash_}}};
}

HttpResult Service::explain(const json& request) {
  const FeatureVector x = parse_features(request);
  const auto m = request.find("method");
  if (m == request.end() || !m->is_string()) {
    throw RequestError{400, "invalid request", {{"method", "is required"}}};
  }
  Method method;
  try {
    method = parse_method(m->get<std::string>());
  } catch (const ConfigError& e) {
    throw RequestError{400, "invalid request", {{"method", e.what()}}};
  }
  const std::uint64_t seed = parse_seed(request, config_.default_seed);
  const int target = parse_target(request, model_.classes(), false).value_or(model_.predict(x));
  const auto& schema = model_.schema();
  const auto& classes = model_.classes();

  json out;
  switch (method) {
    case Method::permutation: {
      const std::size_t repeats = parse_count(request, "repeats", config_.permutation_repeats, 1, 100);
      out = attribution_to_json(permutation_importance(model_, background_, repeats, seed), schema, classes);
      break;
    }
    case Method::gain:
      out = attribution_to_json(gain_importance(model_), schema, classes);
      break;
    case Method::path:
      out = attribution_to_json(path_contributions(model_, x, target), schema, classes);
      break;
    case Method::shapley_exact:
      out = attribution_to_json(shapley_exact(model_, x, background_x_, target), schema, classes);
      break;
    case Method::shapley_kernel: {
      const std::size_t n = parse_count(request, "n_samples", config_.kernel_samples, 2 * kNumFeatures + 2, 100000);
      out = attribution_to_json(shapley_kernel(model_, x, background_x_, target, n, seed), schema, classes);
      break;
    }
    case Method::lime: {
      LimeConfig cfg;
      cfg.seed = seed;
      cfg.n_perturbations = parse_count(request, "n_perturbations", cfg.n_perturbations, 50, 100000);
      out = lime_to_json(lime_explain(model_, x, model_.info().stats, target, cfg), schema, classes);
      break;
    }
  }
  out["seed"] = seed;
  out["model_kind"] = to_string(model_.kind());
  out["model_hash"] = hash_;
  return {200, out};
}

HttpResult Service::counterfactual(const json& request) {
  const FeatureVector x = parse_features(request);
  CounterfactualConfig cfg = config_.counterfactual;
  cfg.target = *parse_target(request, model_.classes(), true);
  cfg.seed = parse_seed(request, config_.default_seed);
  cfg.count = parse_count(request, "count", cfg.count, 1, 10);
  if (const auto it = request.find("immutable"); it != request.end() && !it->is_null()) {
    if (!it->is_array()) throw RequestError{400, "invalid request", {{"immutable", "must be a list of feature names"}}};
    cfg.immutable.fill(false);
    std::vector<FieldError> errors;
    for (const auto& name : *it) {
      const auto j = name.is_string() ? model_.schema().find(name.get<std::string>()) : std::nullopt;
      if (!j) {
        errors.push_back({"immutable", "unknown feature " + name.dump()});
        continue;
      }
      cfg.immutable[*j] = true;
    }
    if (!errors.empty()) throw RequestError{400, "invalid request", errors};
  }

  CounterfactualResult result = counterfactual_search(model_, x, cfg, model_.info().stats);
  // Re-check every candidate against the served model before it leaves.
  std::vector<Counterfactual> checked;
  for (const auto& c : result.counterfactuals) {
    if (model_.predict(c.features) == cfg.target) {
      checked.push_back(c);
    } else {
      logger_.log(LogLevel::error, "invalid_counterfactual_dropped", {{"target", model_.classes()[static_cast<std::size_t>(cfg.target)]}});
    }
  }
  result.counterfactuals = std::move(checked);
  if (result.counterfactuals.empty()) result.status = CounterfactualStatus::not_found;

  json out = counterfactual_to_json(result, x, model_.schema(), model_.classes());
  std::vector<std::string> immutable;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    if (cfg.immutable[j]) immutable.push_back(model_.schema().names[j]);
  }
  out["immutable"] = immutable;
  out["validated"] = true;
  out["model_kind"] = to_string(model_.kind());
  out["model_hash"] = hash_;
  if (result.status == CounterfactualStatus::not_found) {
    out["message"] = "no feasible change found for this crop";
  }
  return {200, out};
}

HttpResult Service::model_info() const {
  const TrainedModel& m = model_;
  return {200,
          {{"kind", to_string(m.kind())},
           {"classes", m.classes()},
           {"schema", schema_to_json(m.schema())},
           {"hyperparameters", hyperparameters_to_json(m.params())},
           {"model_hash", hash_},
           {"created_at", m.info().created_at},
           {"n_train", m.info().n_train},
           {"seed", m.info().seed},
           {"background_size", background_.size()},
           {"importance", attribution_to_json(importance_, m.schema(), m.classes())}}};
}

void Service::mount(httplib::Server& server) {
  server.set_payload_max_length(config_.body_limit);
  auto respond = [this](const httplib::Request& req, httplib::Response& res) {
    const auto start = std::chrono::steady_clock::now();
    const HttpResult r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    logger_.log(r.status >= 500 ? LogLevel::error : LogLevel::info, "request",
                {{"method", req.method}, {"path", req.path}, {"status", r.status}, {"ms", ms}});
  };
  for (const char* route : {"/v1/health", "/v1/model", "/v1/predict", "/v1/explain", "/v1/counterfactual"}) {
    server.Get(route, respond);
    server.Post(route, respond);
  }
  server.set_error_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const char* message = res.status == 413 ? "request body too large" : "no route for this request";
    res.set_content(error_result(res.status, message).body.dump(), "application/json");
    logger_.log(LogLevel::info, "request", {{"method", req.method}, {"path", req.path}, {"status", res.status}});
  });
  if (!config_.cors_origin.empty()) {
    const std::string origin = config_.cors_origin;
    server.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
    });
    server.Options(R"(/v1/.*)", [origin](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Max-Age", "600");
      res.status = 204;
    });
  }
}

bool Service::listen() {
  httplib::Server server;
  mount(server);
  logger_.log(LogLevel::info, "listening",
              {{"host", config_.host}, {"port", config_.port}, {"model_kind", to_string(model_.kind())},
               {"model_hash", hash_}});
  return server.listen(config_.host, config_.port);
}

}  // namespace cropxai
