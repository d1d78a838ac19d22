#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <future>
#include <sstream>
#include <thread>

#include "cropxai/artifact.hpp"
#include "cropxai/error.hpp"
#include "cropxai/service.hpp"
#include "support/fixtures.hpp"

// After the project headers: <resolv.h> defines a _res macro that breaks Eigen.
#include <httplib.h>

using namespace cropxai;
using nlohmann::json;

namespace {

Dataset background() { return stratified_sample(testing::synthetic_split().train, 100, 42); }

Service& rf_service() {
  static std::ostringstream log;
  static Service service(testing::trained(ModelKind::rf), background(), "rf-test-hash", ServiceConfig{}, log);
  return service;
}

const json kPapaya = json::array({44, 60, 55, 34.28046, 90.555618, 6.825371, 98.540474});

HttpResult post(Service& s, const std::string& path, const json& body) { return s.handle("POST", path, body.dump()); }

bool has_field(const json& body, const std::string& field) {
  for (const auto& f : body["fields"]) {
    if (f["field"] == field) return true;
  }
  return false;
}

// Serves `service` on an ephemeral loopback port for the lifetime of the object.
class LiveServer {
 public:
  explicit LiveServer(Service& service) {
    service.mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("health and model metadata") {
    Service& s = rf_service();
    const auto h = s.handle("GET", "/v1/health", "");
    CHECK(h.status == 200);
    CHECK(h.body["status"] == "ok");
    const auto m = s.handle("GET", "/v1/model", "");
    CHECK(m.status == 200);
    CHECK(m.body["kind"] == "rf");
    CHECK(m.body["classes"].size() == 22);
    CHECK(m.body["schema"]["features"].size() == 7);
    CHECK(m.body["importance"]["method"] == "gain");
    CHECK(m.body["importance"]["contributions"].size() == 7);
    CHECK(m.body["model_hash"] == "rf-test-hash");
    CHECK(m.body["background_size"] == 100);
  }

  TEST_CASE("predict the papaya instance") {
    const auto r = post(rf_service(), "/v1/predict", {{"features", kPapaya}});
    REQUIRE(r.status == 200);
    CHECK(r.body["predicted_class"] == "papaya");
    CHECK(r.body["model_kind"] == "rf");
    CHECK(r.body["model_hash"] == "rf-test-hash");
    double sum = 0.0;
    REQUIRE(r.body["probabilities"].size() == 22);
    for (const auto& p : r.body["probabilities"]) {
      CHECK(p["probability"].get<double>() >= 0.0);
      sum += p["probability"].get<double>();
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }

  TEST_CASE("features may be given by name") {
    const json named = {{"N", 44},          {"P", 60},       {"K", 55},          {"temperature", 34.28046},
                        {"humidity", 90.555618}, {"ph", 6.825371}, {"rainfall", 98.540474}};
    const auto a = post(rf_service(), "/v1/predict", {{"features", named}});
    const auto b = post(rf_service(), "/v1/predict", {{"features", kPapaya}});
    REQUIRE(a.status == 200);
    CHECK(a.body == b.body);
  }

  TEST_CASE("malformed predict bodies are 400 with field messages") {
    Service& s = rf_service();
    auto r = post(s, "/v1/predict", {{"features", json::array({1, 2, 3, 4, 5, 6})}});
    CHECK(r.status == 400);
    CHECK(has_field(r.body, "features"));
    r = post(s, "/v1/predict", {{"features", json::array({1, 2, "x", 4, 50, 6, 7})}});
    CHECK(r.status == 400);
    CHECK(has_field(r.body, "features[2]"));
    r = post(s, "/v1/predict", {{"features", json::array({1, 2, 3, 4, 150, 6, 7})}});
    CHECK(r.status == 400);
    CHECK(has_field(r.body, "features[4]"));
    r = post(s, "/v1/predict", {{"features", {{"N", 1}}}});
    CHECK(r.status == 400);
    CHECK(has_field(r.body, "features.rainfall"));
    r = post(s, "/v1/predict", json::object());
    CHECK(r.status == 400);
    CHECK(has_field(r.body, "features"));
    r = s.handle("POST", "/v1/predict", "{not json");
    CHECK(r.status == 400);
    r = s.handle("POST", "/v1/predict", "[1,2]");
    CHECK(r.status == 400);
    CHECK(r.body.contains("error"));
  }

  TEST_CASE("unknown routes and wrong methods") {
    CHECK(rf_service().handle("GET", "/v1/nothing", "").status == 404);
    CHECK(rf_service().handle("GET", "/v1/predict", "").status == 405);
    CHECK(rf_service().handle("POST", "/v1/health", "{}").status == 405);
  }

  TEST_CASE("every explanation method answers and echoes its seed") {
    Service& s = rf_service();
    for (const char* method : {"permutation", "gain", "path", "shap-exact", "shap-kernel", "lime"}) {
      CAPTURE(method);
      json req = {{"features", kPapaya}, {"method", method}, {"seed", 7}};
      if (std::string(method) == "shap-kernel") req["n_samples"] = 200;
      if (std::string(method) == "permutation") req["repeats"] = 2;
      if (std::string(method) == "lime") req["n_perturbations"] = 500;
      const auto r = post(s, "/v1/explain", req);
      REQUIRE(r.status == 200);
      CHECK(r.body["seed"] == 7);
      CHECK(r.body["model_hash"] == "rf-test-hash");
    }
  }

  TEST_CASE("exact Shapley over the wire satisfies efficiency for the papaya probability") {
    Service& s = rf_service();
    const auto r = post(s, "/v1/explain", {{"features", kPapaya}, {"method", "shap-exact"}, {"target_class", "papaya"}});
    REQUIRE(r.status == 200);
    double total = r.body["baseline"].get<double>();
    for (const auto& c : r.body["contributions"]) total += c["value"].get<double>();
    const auto p = post(s, "/v1/predict", {{"features", kPapaya}});
    double papaya = 0.0;
    for (const auto& e : p.body["probabilities"]) {
      if (e["class"] == "papaya") papaya = e["probability"].get<double>();
    }
    CHECK(std::abs(total - papaya) < 1e-9);
    CHECK(r.body["target_class"] == "papaya");
  }

  TEST_CASE("explain validation") {
    Service& s = rf_service();
    auto r = post(s, "/v1/explain", {{"features", kPapaya}});
    CHECK(r.status == 400);
    CHECK(has_field(r.body, "method"));
    r = post(s, "/v1/explain", {{"features", kPapaya}, {"method", "eli5"}});
    CHECK(r.status == 400);
    r = post(s, "/v1/explain", {{"features", kPapaya}, {"method", "path"}, {"target_class", "tomato"}});
    CHECK(r.status == 422);
    CHECK(has_field(r.body, "target_class"));
    r = post(s, "/v1/explain", {{"features", kPapaya}, {"method", "lime"}, {"seed", -1}});
    CHECK(r.status == 400);
    CHECK(has_field(r.body, "seed"));
    r = post(s, "/v1/explain", {{"features", kPapaya}, {"method", "shap-kernel"}, {"n_samples", 3}});
    CHECK(r.status == 400);
  }

  TEST_CASE("tree-only methods on a KNN service are 422") {
    std::ostringstream log;
    Service knn(testing::trained(ModelKind::knn), background(), "knn", ServiceConfig{}, log);
    CHECK(post(knn, "/v1/explain", {{"features", kPapaya}, {"method", "gain"}}).status == 422);
    CHECK(post(knn, "/v1/explain", {{"features", kPapaya}, {"method", "path"}}).status == 422);
    CHECK(post(knn, "/v1/explain", {{"features", kPapaya}, {"method", "shap-exact"}}).status == 200);
    CHECK(knn.handle("GET", "/v1/model", "").body["importance"]["method"] == "permutation");
  }

  TEST_CASE("counterfactuals for rice are valid and keep immutable features") {
    Service& s = rf_service();
    const auto r = post(s, "/v1/counterfactual", {{"features", kPapaya}, {"target_class", "rice"}, {"seed", 42}});
    REQUIRE(r.status == 200);
    CHECK(r.body["validated"] == true);
    CHECK(r.body["immutable"] == json::array({"temperature", "ph"}));
    if (r.body["status"] == "found") {
      REQUIRE(!r.body["counterfactuals"].empty());
      for (const auto& c : r.body["counterfactuals"]) {
        CHECK(c["predicted_class"] == "rice");
        const auto p = post(s, "/v1/predict", {{"features", c["features"]}});
        CHECK(p.body["predicted_class"] == "rice");
        CHECK(c["deltas"]["temperature"] == 0.0);
        CHECK(c["deltas"]["ph"] == 0.0);
      }
    } else {
      CHECK(r.body["status"] == "not_found");
      CHECK(r.body.contains("message"));
    }
  }

  TEST_CASE("counterfactual immutable override and validation") {
    Service& s = rf_service();
    auto r = post(s, "/v1/counterfactual",
                  {{"features", kPapaya}, {"target_class", "mango"}, {"immutable", {"rainfall", "N"}}, {"count", 2}});
    REQUIRE(r.status == 200);
    CHECK(r.body["immutable"] == json::array({"nitrogen", "rainfall"}));
    CHECK(r.body["counterfactuals"].size() <= 2);
    for (const auto& c : r.body["counterfactuals"]) {
      CHECK(c["deltas"]["rainfall"] == 0.0);
      CHECK(c["deltas"]["nitrogen"] == 0.0);
    }
    r = post(s, "/v1/counterfactual", {{"features", kPapaya}});
    CHECK(r.status == 400);
    CHECK(has_field(r.body, "target_class"));
    r = post(s, "/v1/counterfactual", {{"features", kPapaya}, {"target_class", "wheat"}});
    CHECK(r.status == 422);
    r = post(s, "/v1/counterfactual", {{"features", kPapaya}, {"target_class", "rice"}, {"count", 0}});
    CHECK(r.status == 400);
    CHECK(has_field(r.body, "count"));
    r = post(s, "/v1/counterfactual", {{"features", kPapaya}, {"target_class", "rice"}, {"immutable", {"soil"}}});
    CHECK(r.status == 400);
    CHECK(has_field(r.body, "immutable"));
  }

  TEST_CASE("identical requests give identical response bytes") {
    Service& s = rf_service();
    const json cf = {{"features", kPapaya}, {"target_class", "rice"}, {"seed", 3}};
    CHECK(post(s, "/v1/counterfactual", cf).body.dump() == post(s, "/v1/counterfactual", cf).body.dump());
    const json lime = {{"features", kPapaya}, {"method", "lime"}, {"seed", 3}, {"n_perturbations", 300}};
    CHECK(post(s, "/v1/explain", lime).body.dump() == post(s, "/v1/explain", lime).body.dump());
    const json kernel = {{"features", kPapaya}, {"method", "shap-kernel"}, {"n_samples", 40}};
    const auto a = post(s, "/v1/explain", kernel);
    CHECK(a.body["seed"] == 42);
    CHECK(a.body.dump() == post(s, "/v1/explain", kernel).body.dump());
  }

  TEST_CASE("predict stays under 50 ms for every model kind") {
    for (ModelKind kind : kAllModelKinds) {
      std::ostringstream log;
      ServiceConfig cfg;
      cfg.permutation_repeats = 1;
      Service s(testing::trained(kind), background(), "h", cfg, log);
      const std::string body = json{{"features", kPapaya}}.dump();
      double worst = 0.0;
      for (int i = 0; i < 20; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        CHECK(s.handle("POST", "/v1/predict", body).status == 200);
        worst = std::max(worst, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      }
      CAPTURE(to_string(kind));
      CHECK(worst < 50.0);
    }
  }

  TEST_CASE("over HTTP: routes, CORS, body limit and concurrent requests") {
    std::ostringstream log;
    ServiceConfig cfg;
    cfg.cors_origin = "http://localhost:5173";
    cfg.body_limit = 4096;
    cfg.max_concurrency = 2;
    Service s(testing::trained(ModelKind::rf), background(), "live", cfg, log);
    LiveServer server(s);
    auto client = server.client();

    auto health = client.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Content-Type") == "application/json");
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");

    auto predict = client.Post("/v1/predict", json{{"features", kPapaya}}.dump(), "application/json");
    REQUIRE(predict);
    CHECK(predict->status == 200);
    CHECK(json::parse(predict->body)["predicted_class"] == "papaya");

    auto bad = client.Post("/v1/predict", R"({"features":[1,2,3]})", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body).contains("fields"));

    auto unknown = client.Post("/v1/counterfactual", json{{"features", kPapaya}, {"target_class", "tomato"}}.dump(),
                               "application/json");
    REQUIRE(unknown);
    CHECK(unknown->status == 422);

    auto missing = client.Get("/v2/predict");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body).contains("error"));

    auto big = client.Post("/v1/predict", std::string(8192, ' '), "application/json");
    REQUIRE(big);
    CHECK(big->status == 413);

    auto preflight = client.Options("/v1/explain");
    REQUIRE(preflight);
    CHECK(preflight->status == 204);
    CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

    const json explain = {{"features", kPapaya}, {"method", "shap-kernel"}, {"n_samples", 64}, {"seed", 5}};
    std::vector<std::future<std::string>> jobs;
    for (int i = 0; i < 6; ++i) {
      jobs.push_back(std::async(std::launch::async, [&] {
        auto c = server.client();
        auto r = c.Post("/v1/explain", explain.dump(), "application/json");
        return r && r->status == 200 ? r->body : std::string();
      }));
    }
    std::vector<std::string> bodies;
    for (auto& j : jobs) bodies.push_back(j.get());
    for (const auto& b : bodies) {
      CHECK(!b.empty());
      CHECK(b == bodies.front());
    }
    CHECK(log.str().find("\"event\":\"request\"") != std::string::npos);
  }

  TEST_CASE("logs are one JSON object per line") {
    std::ostringstream out;
    JsonLogger logger(out, LogLevel::info);
    logger.log(LogLevel::debug, "hidden");
    logger.log(LogLevel::info, "shown", {{"k", 1}});
    logger.log(LogLevel::error, "bad");
    std::istringstream lines(out.str());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
      const json j = json::parse(line);
      CHECK(j.contains("ts"));
      CHECK(j["event"] != "hidden");
      ++n;
    }
    CHECK(n == 2);
  }

  TEST_CASE("environment overrides") {
    ServiceConfig cfg;
    setenv("CROPXAI_LISTEN", "0.0.0.0:9090", 1);
    setenv("CROPXAI_MODEL", "/models/rf.model", 1);
    setenv("CROPXAI_BACKGROUND", "/models/bg.csv", 1);
    apply_env_overrides(cfg);
    CHECK(cfg.host == "0.0.0.0");
    CHECK(cfg.port == 9090);
    CHECK(cfg.model_path == "/models/rf.model");
    CHECK(cfg.background_path == "/models/bg.csv");
    setenv("CROPXAI_LISTEN", ":7000", 1);
    apply_env_overrides(cfg);
    CHECK(cfg.host == "0.0.0.0");
    CHECK(cfg.port == 7000);
    setenv("CROPXAI_LISTEN", "host:notaport", 1);
    CHECK_THROWS_AS(apply_env_overrides(cfg), ConfigError);
    unsetenv("CROPXAI_LISTEN");
    unsetenv("CROPXAI_MODEL");
    unsetenv("CROPXAI_BACKGROUND");
  }

  TEST_CASE("config validation and startup failures") {
    ServiceConfig cfg;
    cfg.model_path = "rf.model";
    CHECK_NOTHROW(cfg.validate());
    cfg.port = 70000;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.port = 8080;
    cfg.max_concurrency = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(ServiceConfig{}.validate(), ConfigError);

    testing::TempDir dir("service");
    std::ostringstream log;
    cfg = ServiceConfig{};
    cfg.model_path = dir / "missing.model";
    CHECK_THROWS_AS(Service::load(cfg, log), ArtifactError);
    {
      std::ofstream(dir / "bad.model") << "{\"format_version\": 1}";
    }
    cfg.model_path = dir / "bad.model";
    CHECK_THROWS_AS(Service::load(cfg, log), ArtifactError);

    save_model(testing::trained(ModelKind::dt), dir / "dt.model");
    {
      std::ofstream bg(dir / "dt.model.background.csv");
      write_dataset(bg, background());
    }
    cfg.model_path = dir / "dt.model";
    Service s = Service::load(cfg, log);
    CHECK(s.model_hash().size() == 64);
    CHECK(s.handle("GET", "/v1/health", "").status == 200);
  }

  TEST_CASE("sha256") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  }
}
