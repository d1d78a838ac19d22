#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cropxai/attribution.hpp"
#include "cropxai/counterfactual.hpp"
#include "cropxai/model.hpp"

namespace httplib {
class Server;
}

namespace cropxai {

enum class LogLevel { debug, info, warn, error };
LogLevel parse_log_level(std::string_view s);

// One JSON object per line.
class JsonLogger {
 public:
  JsonLogger(std::ostream& out, LogLevel level) : out_(&out), level_(level) {}
  void log(LogLevel level, const std::string& event, nlohmann::json fields = nlohmann::json::object());

 private:
  std::ostream* out_;
  LogLevel level_;
  std::mutex mutex_;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path model_path;
  std::filesystem::path background_path;  // empty: "<model>.background.csv"
  CounterfactualConfig counterfactual;    // defaults for /v1/counterfactual
  std::size_t body_limit = 64 * 1024;
  std::size_t max_concurrency = 4;        // concurrent explain/counterfactual jobs
  std::string cors_origin;                // empty: no CORS headers
  std::uint64_t default_seed = 42;
  std::size_t kernel_samples = 2048;
  std::size_t permutation_repeats = 5;
  LogLevel log_level = LogLevel::info;

  void validate() const;
};

// CROPXAI_LISTEN ("host:port" or ":port"), CROPXAI_MODEL and
// CROPXAI_BACKGROUND override the corresponding fields when set.
void apply_env_overrides(ServiceConfig& config);

std::string sha256_hex(std::string_view bytes);

struct HttpResult {
  int status = 200;
  nlohmann::json body;
};

// Stateless request handling over one immutable model and background set.
class Service {
 public:
  Service(TrainedModel model, Dataset background, std::string model_hash, ServiceConfig config,
          std::ostream& log_sink);

  // Loads the artifact and background set named in `config`; throws on
  // any startup problem so the caller can exit before binding.
  static Service load(ServiceConfig config, std::ostream& log_sink);

  HttpResult handle(const std::string& method, const std::string& path, const std::string& body);

  // Registers the /v1 routes, CORS handling and request logging.
  void mount(httplib::Server& server);
  // Serves on config().host:port until the process ends. Returns false if
  // the address cannot be bound.
  bool listen();

  const TrainedModel& model() const { return model_; }
  const ServiceConfig& config() const { return config_; }
  const std::string& model_hash() const { return hash_; }
  JsonLogger& logger() { return logger_; }

 private:
  class Slot;

  HttpResult predict(const nlohmann::json& request);
  HttpResult explain(const nlohmann::json& request);
  HttpResult counterfactual(const nlohmann::json& request);
  HttpResult model_info() const;

  TrainedModel model_;
  Dataset background_;
  std::vector<FeatureVector> background_x_;
  std::string hash_;
  ServiceConfig config_;
  JsonLogger logger_;
  Attribution importance_;

  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  std::size_t busy_ = 0;
};

}  // namespace cropxai
