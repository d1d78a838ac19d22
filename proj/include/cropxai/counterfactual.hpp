#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cropxai/model.hpp"

namespace cropxai {

struct CounterfactualConfig {
  int target = 0;
  std::size_t count = 3;
  // Temperature and pH are not something a grower can change.
  std::array<bool, kNumFeatures> immutable{false, false, false, true, false, true, false};
  // Permitted [lo, hi] per feature; empty means the training min/max.
  std::array<std::optional<std::pair<double, double>>, kNumFeatures> ranges{};
  std::size_t population = 200;
  std::size_t generations = 300;
  // Stop early once a valid candidate exists and the best cost has not
  // improved for this many generations (0 disables early stopping).
  std::size_t patience = 60;
  std::uint64_t seed = 42;
  double proximity_weight = 1.0;
  double sparsity_weight = 0.1;
  double diversity_weight = 0.5;
};

struct Counterfactual {
  FeatureVector features{};
  int predicted = 0;
  FeatureVector deltas{};      // features - query
  double distance = 0.0;       // sum |delta_j| / scale_j
  std::size_t changed = 0;
  double target_probability = 0.0;
};

enum class CounterfactualStatus { found, not_found };

struct CounterfactualResult {
  CounterfactualStatus status = CounterfactualStatus::not_found;
  int target = 0;
  int query_prediction = 0;
  std::vector<Counterfactual> counterfactuals;  // ascending distance
  std::size_t generations_run = 0;
  std::uint64_t seed = 0;
};

// Per-feature distance scale: MAD, else half the range, else 1.
FeatureVector distance_scales(const FeatureStats& stats);

// Genetic search for inputs the model assigns to `config.target`, close to
// the query in scaled L1 distance and changing few features. Immutable
// features are copied from the query bit for bit; changed features stay
// inside their permitted range. Every returned candidate is re-checked
// with model.predict. Throws ConfigError on an empty permitted range or a
// zero budget.
CounterfactualResult counterfactual_search(const Classifier& model, const FeatureVector& query,
                                           const CounterfactualConfig& config, const FeatureStats& stats);

struct DeltaRow {
  std::size_t feature = 0;
  double query = 0.0;
  double value = 0.0;
  double delta = 0.0;
};

// Signed per-feature changes for each counterfactual; rows with a zero
// delta are left out.
std::vector<std::vector<DeltaRow>> counterfactual_delta_report(const FeatureVector& query,
                                                               const std::vector<FeatureVector>& counterfactuals);

nlohmann::json counterfactual_to_json(const CounterfactualResult& result, const FeatureVector& query,
                                      const FeatureSchema& schema, const std::vector<std::string>& classes);

// Query and counterfactuals as rows with the predicted class, then one
// signed bar per changed feature.
std::string render_delta_table(const CounterfactualResult& result, const FeatureVector& query,
                               const FeatureSchema& schema, const std::vector<std::string>& classes);

}  // namespace cropxai
