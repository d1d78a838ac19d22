#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cropxai {

inline constexpr std::size_t kNumFeatures = 7;

using FeatureVector = std::array<double, kNumFeatures>;

enum Feature : std::size_t {
  kNitrogen = 0,
  kPhosphorus,
  kPotassium,
  kTemperature,
  kHumidity,
  kPh,
  kRainfall,
};

struct FeatureSchema {
  std::array<std::string, kNumFeatures> names;
  std::array<std::string, kNumFeatures> units;
  std::string label_name;

  // nitrogen, phosphorus, potassium, temperature, humidity, ph, rainfall.
  static const FeatureSchema& crop();

  // Index of a feature by canonical name or CSV alias ("N", "P", "K").
  std::optional<std::size_t> find(std::string_view name) const;
  void validate() const;
};

bool operator==(const FeatureSchema& a, const FeatureSchema& b);

struct Sample {
  FeatureVector features{};
  std::optional<int> label;
};

// Empty string when the vector satisfies the range invariants, otherwise a
// description of the first violation.
std::string sample_violation(const FeatureVector& features);
// Same check for a single feature value.
std::string feature_violation(std::size_t feature, double value);

// The 22 crops in canonical (lexicographic) order.
const std::vector<std::string>& crop_classes();

// Looks up a crop name; case, spaces and underscores are ignored so
// "kidney beans" and "kidneybeans" resolve to the same class.
std::optional<int> find_class(const std::vector<std::string>& classes, std::string_view name);

struct Dataset {
  FeatureSchema schema = FeatureSchema::crop();
  std::vector<Sample> samples;
  std::vector<std::string> classes = crop_classes();

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t num_classes() const { return classes.size(); }

  // Per-class sample counts; unlabeled samples are not counted.
  std::vector<std::size_t> class_counts() const;
  // Number of distinct labels present.
  std::size_t present_classes() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
  std::vector<FeatureVector> feature_matrix() const;
};

// Parses the crop CSV. The header must name all seven features (canonical
// names or the Kaggle aliases); the label column is optional.
Dataset load_dataset(std::istream& in, const FeatureSchema& schema = FeatureSchema::crop());
Dataset load_dataset(const std::filesystem::path& path,
                     const FeatureSchema& schema = FeatureSchema::crop());
void write_dataset(std::ostream& out, const Dataset& dataset);

struct Split {
  Dataset train;
  Dataset test;
};

Split stratified_split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

// Index folds for stratified k-fold; fold f holds the validation indices.
std::vector<std::vector<std::size_t>> stratified_folds(const Dataset& dataset, std::size_t folds,
                                                       std::uint64_t seed);

// Draws `count` rows proportionally per class (largest remainder), used for
// background sets.
Dataset stratified_sample(const Dataset& dataset, std::size_t count, std::uint64_t seed);

struct FeatureSummary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double mad = 0.0;
};

struct FeatureStats {
  std::array<FeatureSummary, kNumFeatures> features{};
  std::size_t count = 0;

  const FeatureSummary& operator[](std::size_t j) const { return features[j]; }
};

FeatureStats compute_stats(const Dataset& dataset);

// Linear-interpolation quantile of sorted data (the "inclusive" method).
double quantile_sorted(const std::vector<double>& sorted, double q);

class Scaler {
 public:
  Scaler() = default;
  Scaler(FeatureVector mean, FeatureVector scale) : mean_(mean), scale_(scale) {}

  static Scaler fit(const Dataset& train);

  FeatureVector apply(const FeatureVector& x) const;
  FeatureVector invert(const FeatureVector& z) const;
  Sample apply(const Sample& s) const { return {apply(s.features), s.label}; }

  const FeatureVector& mean() const { return mean_; }
  // Population standard deviation, or 1 for constant columns.
  const FeatureVector& scale() const { return scale_; }

  friend bool operator==(const Scaler&, const Scaler&) = default;

 private:
  FeatureVector mean_{};
  FeatureVector scale_{1, 1, 1, 1, 1, 1, 1};
};

inline Scaler fit_scaler(const Dataset& train) { return Scaler::fit(train); }
inline Sample apply_scaler(const Scaler& scaler, const Sample& sample) {
  return scaler.apply(sample);
}

}  // namespace cropxai
