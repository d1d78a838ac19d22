#include "cropxai/lime.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <numeric>

#include "cropxai/error.hpp"
#include "cropxai/rng.hpp"

namespace cropxai {

namespace {

constexpr int kBins = 4;

struct BinBounds {
  double lo;
  double hi;
};

BinBounds bin_bounds(const FeatureSummary& s, int bin) {
  switch (bin) {
    case 0: return {s.min, s.q1};
    case 1: return {s.q1, s.median};
    case 2: return {s.median, s.q3};
    default: return {s.q3, s.max};
  }
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

LimeRule make_rule(const FeatureSummary& s, const std::string& name, std::size_t feature, int bin) {
  LimeRule r;
  r.feature = feature;
  switch (bin) {
    case 0:
      r.upper = s.q1;
      r.condition = name + " <= " + format_number(s.q1);
      break;
    case 1:
      r.lower = s.q1;
      r.upper = s.median;
      r.condition = format_number(s.q1) + " < " + name + " <= " + format_number(s.median);
      break;
    case 2:
      r.lower = s.median;
      r.upper = s.q3;
      r.condition = format_number(s.median) + " < " + name + " <= " + format_number(s.q3);
      break;
    default:
      r.lower = s.q3;
      r.condition = name + " > " + format_number(s.q3);
      break;
  }
  return r;
}

}  // namespace

int quartile_bin(const FeatureSummary& s, double value) {
  if (value <= s.q1) return 0;
  if (value <= s.median) return 1;
  if (value <= s.q3) return 2;
  return 3;
}

Attribution LimeExplanation::attribution() const {
  Attribution a;
  a.method = Method::lime;
  a.target = target;
  a.baseline = intercept;
  a.output = prediction;
  a.contributions = weights;
  a.metadata = {{"n_perturbations", n_perturbations},
                {"kernel_width", kernel_width},
                {"seed", seed},
                {"local_prediction", local_prediction}};
  a.metadata["fidelity"] = fidelity ? nlohmann::json(*fidelity) : nlohmann::json(nullptr);
  return a;
}

LimeExplanation lime_explain(const Classifier& model, const FeatureVector& x, const FeatureStats& stats,
                             int target, const LimeConfig& config) {
  if (!(config.kernel_width > 0.0)) throw ConfigError("LIME kernel width must be > 0");
  if (config.n_perturbations < 50) throw ConfigError("LIME needs at least 50 perturbations");
  if (config.ridge < 0.0) throw ConfigError("LIME ridge strength must be >= 0");
  if (target < 0 || static_cast<std::size_t>(target) >= model.num_classes()) {
    throw InputError("target class index " + std::to_string(target) + " out of range");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("feature values must be finite");
  }

  std::array<int, kNumFeatures> query_bin{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) query_bin[j] = quartile_bin(stats[j], x[j]);

  const auto n = static_cast<Eigen::Index>(config.n_perturbations);
  const auto m = static_cast<Eigen::Index>(kNumFeatures);
  Eigen::MatrixXd z(n, m);
  Eigen::VectorXd y(n);
  Eigen::VectorXd w(n);
  Rng rng(config.seed);
  std::vector<double> proba(model.num_classes());
  for (Eigen::Index i = 0; i < n; ++i) {
    FeatureVector p = x;
    if (i > 0) {
      for (std::size_t j = 0; j < kNumFeatures; ++j) {
        const int bin = static_cast<int>(rng.index(kBins));
        const BinBounds b = bin_bounds(stats[j], bin);
        p[j] = b.hi - rng.uniform() * (b.hi - b.lo);
      }
    }
    int distance = 0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      const bool same = quartile_bin(stats[j], p[j]) == query_bin[j];
      z(i, static_cast<Eigen::Index>(j)) = same ? 1.0 : 0.0;
      distance += same ? 0 : 1;
    }
    model.predict_proba(p, proba);
    y(i) = proba[static_cast<std::size_t>(target)];
    const double d = distance;
    w(i) = std::exp(-(d * d) / (config.kernel_width * config.kernel_width));
  }

  const double w_sum = w.sum();
  const Eigen::RowVectorXd z_mean = (w.asDiagonal() * z).colwise().sum() / w_sum;
  const double y_mean = w.dot(y) / w_sum;
  const Eigen::MatrixXd zc = z.rowwise() - z_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  Eigen::MatrixXd gram = zc.transpose() * w.asDiagonal() * zc;
  gram.diagonal().array() += config.ridge;
  const Eigen::VectorXd rhs = zc.transpose() * w.asDiagonal() * yc;
  const Eigen::VectorXd beta = gram.ldlt().solve(rhs);
  if (!beta.allFinite()) throw NumericalError("LIME surrogate fit failed");

  LimeExplanation e;
  e.target = target;
  e.intercept = y_mean - z_mean.dot(beta);
  for (std::size_t j = 0; j < kNumFeatures; ++j) e.weights[j] = beta(static_cast<Eigen::Index>(j));
  e.prediction = y(0);
  e.local_prediction = e.intercept + beta.sum();
  e.n_perturbations = config.n_perturbations;
  e.kernel_width = config.kernel_width;
  e.seed = config.seed;

  const Eigen::VectorXd fitted = (z * beta).array() + e.intercept;
  const double ss_res = w.dot((y - fitted).cwiseAbs2());
  const double ss_tot = w.dot(yc.cwiseAbs2());
  if (ss_tot > 1e-12 * w_sum) e.fidelity = 1.0 - ss_res / ss_tot;

  std::vector<std::size_t> order(kNumFeatures);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(e.weights[a]) > std::abs(e.weights[b]);
  });
  const FeatureSchema& schema = FeatureSchema::crop();
  for (std::size_t r = 0; r < std::min(config.top_k, kNumFeatures); ++r) {
    const std::size_t j = order[r];
    LimeRule rule = make_rule(stats[j], schema.names[j], j, query_bin[j]);
    rule.weight = e.weights[j];
    e.rules.push_back(std::move(rule));
  }
  return e;
}

nlohmann::json lime_to_json(const LimeExplanation& e, const FeatureSchema& schema,
                            const std::vector<std::string>& classes) {
  nlohmann::json rules = nlohmann::json::array();
  for (const LimeRule& r : e.rules) {
    rules.push_back({{"feature", schema.names[r.feature]},
                     {"condition", r.condition},
                     {"lower", r.lower ? nlohmann::json(*r.lower) : nlohmann::json(nullptr)},
                     {"upper", r.upper ? nlohmann::json(*r.upper) : nlohmann::json(nullptr)},
                     {"weight", r.weight}});
  }
  return {{"method", "lime"},
          {"target_class", classes.at(static_cast<std::size_t>(e.target))},
          {"rules", rules},
          {"intercept", e.intercept},
          {"prediction", e.prediction},
          {"local_prediction", e.local_prediction},
          {"fidelity", e.fidelity ? nlohmann::json(*e.fidelity) : nlohmann::json(nullptr)},
          {"n_perturbations", e.n_perturbations},
          {"kernel_width", e.kernel_width},
          {"seed", e.seed}};
}

}  // namespace cropxai
