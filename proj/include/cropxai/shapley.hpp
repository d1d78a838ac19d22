#pragma once

#include <cstdint>
#include <vector>

#include "cropxai/attribution.hpp"
#include "cropxai/model.hpp"

namespace cropxai {

inline constexpr std::size_t kNumCoalitions = std::size_t{1} << kNumFeatures;

// Interventional coalition value: mean target-class probability over the
// background rows, with features in `mask` (bit j = feature j) taken from
// `x` and the rest from each background row.
double coalition_value(const Classifier& model, const FeatureVector& x,
                       const std::vector<FeatureVector>& background, int target, unsigned mask);

// Exact Shapley values by enumerating all 128 coalitions. baseline is the
// empty-coalition value, output the model's probability for `target`.
Attribution shapley_exact(const Classifier& model, const FeatureVector& x,
                          const std::vector<FeatureVector>& background, int target);

// Kernel SHAP: Shapley-kernel weighted least squares over coalitions,
// constrained so that baseline + sum = output. With n_samples >= 126 every
// non-trivial coalition is used once and the result equals shapley_exact;
// below that, coalitions are drawn from the kernel distribution.
// Throws ConfigError when n_samples < 16 and NumericalError when the
// sampled design cannot identify all seven values.
Attribution shapley_kernel(const Classifier& model, const FeatureVector& x,
                           const std::vector<FeatureVector>& background, int target,
                           std::size_t n_samples, std::uint64_t seed);

}  // namespace cropxai
