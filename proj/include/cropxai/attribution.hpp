#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cropxai/data.hpp"

namespace cropxai {

enum class Method { permutation, gain, path, shapley_exact, shapley_kernel, lime };

std::string to_string(Method m);
// Accepts the enum spelling and the CLI spelling ("shap-exact", "shap-kernel").
Method parse_method(std::string_view s);

// Signed per-feature contributions. Local methods explain `output` for one
// class; `baseline + sum(contributions)` reproduces it for path and exact
// Shapley attributions. Global methods leave `target` empty.
struct Attribution {
  Method method = Method::permutation;
  std::optional<int> target;
  double baseline = 0.0;
  double output = 0.0;
  std::array<double, kNumFeatures> contributions{};
  nlohmann::json metadata = nlohmann::json::object();

  double total() const;  // baseline + sum(contributions)
};

// Feature indices by decreasing |contribution|; ties keep schema order.
std::vector<std::size_t> ranked_features(const Attribution& a);
std::vector<std::size_t> top_features(const Attribution& a, std::size_t k);

nlohmann::json attribution_to_json(const Attribution& a, const FeatureSchema& schema,
                                   const std::vector<std::string>& classes);

// Horizontal signed bars, one row per feature, scaled to the largest
// magnitude. Positive bars grow right of the axis, negative ones left.
std::string render_bars(const Attribution& a, const FeatureSchema& schema, std::size_t half_width = 24);

// Top-k features per method side by side; methods are not reconciled.
struct MethodComparison {
  std::vector<Attribution> attributions;
  std::size_t k = 3;
};
nlohmann::json comparison_to_json(const MethodComparison& c, const FeatureSchema& schema);
std::string render_method_comparison(const MethodComparison& c, const FeatureSchema& schema);

}  // namespace cropxai
