#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cropxai/attribution.hpp"
#include "cropxai/model.hpp"

namespace cropxai {

struct LimeConfig {
  std::size_t n_perturbations = 5000;
  double kernel_width = 0.75 * std::sqrt(static_cast<double>(kNumFeatures));
  std::size_t top_k = kNumFeatures;
  double ridge = 1.0;
  std::uint64_t seed = 42;
};

// "lower < feature <= upper" with either side open.
struct LimeRule {
  std::size_t feature = 0;
  std::optional<double> lower;
  std::optional<double> upper;
  std::string condition;
  double weight = 0.0;
};

struct LimeExplanation {
  int target = 0;
  std::vector<LimeRule> rules;  // top_k by |weight|, ties in schema order
  std::array<double, kNumFeatures> weights{};  // every feature
  double intercept = 0.0;
  double prediction = 0.0;        // model probability for the query
  double local_prediction = 0.0;  // surrogate at the query
  std::optional<double> fidelity;  // weighted R^2; empty when the model is flat
  std::size_t n_perturbations = 0;
  double kernel_width = 0.0;
  std::uint64_t seed = 0;

  Attribution attribution() const;
};

// Quartile bin (0..3) of `value` for feature `j`: <= q1, <= median, <= q3, above.
int quartile_bin(const FeatureSummary& s, double value);

// Perturbations redraw each feature's quartile bin uniformly and a value
// uniformly inside it (bins 0 and 3 extend to the training min and max).
// Interpretable features are "same bin as the query"; the surrogate is a
// ridge regression on them, weighted by exp(-d^2 / width^2) with d the
// number of features whose bin changed.
LimeExplanation lime_explain(const Classifier& model, const FeatureVector& x, const FeatureStats& stats,
                             int target, const LimeConfig& config = {});

nlohmann::json lime_to_json(const LimeExplanation& e, const FeatureSchema& schema,
                            const std::vector<std::string>& classes);

}  // namespace cropxai
