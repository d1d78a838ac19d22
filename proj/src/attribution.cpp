#include "cropxai/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "cropxai/error.hpp"

namespace cropxai {

std::string to_string(Method m) {
  switch (m) {
    case Method::permutation: return "permutation";
    case Method::gain: return "gain";
    case Method::path: return "path";
    case Method::shapley_exact: return "shapley_exact";
    case Method::shapley_kernel: return "shapley_kernel";
    case Method::lime: return "lime";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  if (s == "permutation") return Method::permutation;
  if (s == "gain") return Method::gain;
  if (s == "path") return Method::path;
  if (s == "shapley_exact" || s == "shap-exact") return Method::shapley_exact;
  if (s == "shapley_kernel" || s == "shap-kernel") return Method::shapley_kernel;
  if (s == "lime") return Method::lime;
  throw ConfigError("unknown explanation method '" + std::string(s) + "'");
}

double Attribution::total() const {
  double s = baseline;
  for (double c : contributions) s += c;
  return s;
}

std::vector<std::size_t> ranked_features(const Attribution& a) {
  std::vector<std::size_t> order(kNumFeatures);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(a.contributions[x]) > std::abs(a.contributions[y]);
  });
  return order;
}

std::vector<std::size_t> top_features(const Attribution& a, std::size_t k) {
  auto order = ranked_features(a);
  order.resize(std::min(k, order.size()));
  return order;
}

nlohmann::json attribution_to_json(const Attribution& a, const FeatureSchema& schema,
                                   const std::vector<std::string>& classes) {
  nlohmann::json contributions = nlohmann::json::array();
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    contributions.push_back({{"feature", schema.names[j]}, {"value", a.contributions[j]}});
  }
  nlohmann::json out{{"method", to_string(a.method)},
                     {"baseline", a.baseline},
                     {"output", a.output},
                     {"contributions", contributions},
                     {"metadata", a.metadata}};
  if (a.target) {
    out["target_class"] = classes.at(static_cast<std::size_t>(*a.target));
  } else {
    out["target_class"] = nullptr;
  }
  return out;
}

std::string render_bars(const Attribution& a, const FeatureSchema& schema, std::size_t half_width) {
  double scale = 0.0;
  for (double c : a.contributions) scale = std::max(scale, std::abs(c));
  std::size_t name_width = 0;
  for (const auto& n : schema.names) name_width = std::max(name_width, n.size());

  std::ostringstream os;
  os << to_string(a.method);
  if (a.target) os << " (class " << *a.target << ")";
  os << '\n';
  for (std::size_t j : ranked_features(a)) {
    const double c = a.contributions[j];
    const auto len = scale > 0.0
                         ? static_cast<std::size_t>(std::lround(std::abs(c) / scale * static_cast<double>(half_width)))
                         : 0;
    std::string left(half_width, ' ');
    std::string right(half_width, ' ');
    if (c < 0) {
      std::fill(left.end() - static_cast<std::ptrdiff_t>(len), left.end(), '-');
    } else {
      std::fill(right.begin(), right.begin() + static_cast<std::ptrdiff_t>(len), '+');
    }
    char value[32];
    std::snprintf(value, sizeof value, "%+.6f", c);
    os << schema.names[j] << std::string(name_width - schema.names[j].size(), ' ') << ' ' << left
       << '|' << right << ' ' << value << '\n';
  }
  return os.str();
}

nlohmann::json comparison_to_json(const MethodComparison& c, const FeatureSchema& schema) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& a : c.attributions) {
    std::vector<std::string> names;
    for (std::size_t j : top_features(a, c.k)) names.push_back(schema.names[j]);
    rows.push_back({{"method", to_string(a.method)}, {"top_features", names}});
  }
  std::vector<std::string> shared;
  for (std::size_t j = 0; j < kNumFeatures && !c.attributions.empty(); ++j) {
    bool everywhere = true;
    for (const auto& a : c.attributions) {
      const auto top = top_features(a, c.k);
      everywhere = everywhere && std::find(top.begin(), top.end(), j) != top.end();
    }
    if (everywhere) shared.push_back(schema.names[j]);
  }
  return {{"k", c.k}, {"methods", rows}, {"shared_top_features", shared}};
}

std::string render_method_comparison(const MethodComparison& c, const FeatureSchema& schema) {
  std::size_t width = 16;
  for (const auto& n : schema.names) width = std::max(width, n.size() + 2);
  std::ostringstream os;
  os << std::string(6, ' ');
  for (const auto& a : c.attributions) {
    const std::string m = to_string(a.method);
    os << m << std::string(width > m.size() ? width - m.size() : 1, ' ');
  }
  os << '\n';
  for (std::size_t r = 0; r < c.k; ++r) {
    os << '#' << r + 1 << std::string(4, ' ');
    for (const auto& a : c.attributions) {
      const auto top = top_features(a, c.k);
      const std::string n = r < top.size() ? schema.names[top[r]] : "";
      os << n << std::string(width > n.size() ? width - n.size() : 1, ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace cropxai
