#include "cropxai/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cropxai/error.hpp"
#include "cropxai/rng.hpp"

namespace cropxai {

namespace {

std::string normalize_token(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ' ' || c == '_' || c == '-') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

const FeatureSchema& FeatureSchema::crop() {
  static const FeatureSchema schema{
      {"nitrogen", "phosphorus", "potassium", "temperature", "humidity", "ph", "rainfall"},
      {"ratio", "ratio", "ratio", "degC", "%", "pH", "mm"},
      "label"};
  return schema;
}

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const {
  const std::string key = normalize_token(name);
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    if (normalize_token(names[j]) == key) return j;
  }
  // Header aliases used by the public crop-recommendation CSV.
  if (key == "n") return find("nitrogen");
  if (key == "p") return find("phosphorus");
  if (key == "k") return find("potassium");
  return std::nullopt;
}

void FeatureSchema::validate() const {
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (names[i].empty()) throw SchemaError("feature " + std::to_string(i) + " has no name");
    for (std::size_t j = i + 1; j < kNumFeatures; ++j) {
      if (normalize_token(names[i]) == normalize_token(names[j])) {
        throw SchemaError("duplicate feature name '" + names[i] + "'");
      }
    }
    if (normalize_token(names[i]) == normalize_token(label_name)) {
      throw SchemaError("label column '" + label_name + "' collides with a feature name");
    }
  }
}

bool operator==(const FeatureSchema& a, const FeatureSchema& b) {
  return a.names == b.names && a.units == b.units && a.label_name == b.label_name;
}

std::string feature_violation(std::size_t j, double value) {
  const auto& names = FeatureSchema::crop().names;
  if (!std::isfinite(value)) return names[j] + " is not finite";
  switch (j) {
    case kNitrogen:
    case kPhosphorus:
    case kPotassium:
    case kRainfall:
      if (value < 0.0) return names[j] + " must be >= 0";
      break;
    case kHumidity:
      if (value < 0.0 || value > 100.0) return "humidity must be in [0, 100]";
      break;
    case kPh:
      if (value < 0.0 || value > 14.0) return "ph must be in [0, 14]";
      break;
    default:
      break;
  }
  return {};
}

std::string sample_violation(const FeatureVector& x) {
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    if (!std::isfinite(x[j])) return feature_violation(j, x[j]);
  }
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    if (std::string v = feature_violation(j, x[j]); !v.empty()) return v;
  }
  return {};
}

const std::vector<std::string>& crop_classes() {
  static const std::vector<std::string> classes{
      "apple",     "banana",     "blackgram", "chickpea",    "coconut",     "coffee",
      "cotton",    "grapes",     "jute",      "kidneybeans", "lentil",      "maize",
      "mango",     "mothbeans",  "mungbean",  "muskmelon",   "orange",      "papaya",
      "pigeonpeas", "pomegranate", "rice",    "watermelon"};
  return classes;
}

std::optional<int> find_class(const std::vector<std::string>& classes, std::string_view name) {
  const std::string key = normalize_token(name);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (normalize_token(classes[c]) == key) return static_cast<int>(c);
  }
  return std::nullopt;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(classes.size(), 0);
  for (const auto& s : samples) {
    if (s.label) ++counts[static_cast<std::size_t>(*s.label)];
  }
  return counts;
}

std::size_t Dataset::present_classes() const {
  const auto counts = class_counts();
  return static_cast<std::size_t>(
      std::count_if(counts.begin(), counts.end(), [](std::size_t n) { return n > 0; }));
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.schema = schema;
  out.classes = classes;
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  return out;
}

std::vector<FeatureVector> Dataset::feature_matrix() const {
  std::vector<FeatureVector> x;
  x.reserve(samples.size());
  for (const auto& s : samples) x.push_back(s.features);
  return x;
}

Dataset load_dataset(std::istream& in, const FeatureSchema& schema) {
  schema.validate();
  Dataset dataset;
  dataset.schema = schema;

  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::array<std::size_t, kNumFeatures> column{};
  std::optional<std::size_t> label_column;
  std::size_t n_columns = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (blank(line)) continue;
    const auto fields = split_fields(line);

    if (!have_header) {
      have_header = true;
      n_columns = fields.size();
      std::array<bool, kNumFeatures> seen{};
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (normalize_token(fields[i]) == normalize_token(schema.label_name)) {
          label_column = i;
          continue;
        }
        if (const auto j = schema.find(fields[i])) {
          if (seen[*j]) throw SchemaError("column '" + schema.names[*j] + "' appears twice");
          seen[*j] = true;
          column[*j] = i;
        }
      }
      for (std::size_t j = 0; j < kNumFeatures; ++j) {
        if (!seen[j]) throw SchemaError("missing column '" + schema.names[j] + "'");
      }
      continue;
    }

    if (fields.size() != n_columns) {
      throw RowError(line_no, "expected " + std::to_string(n_columns) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    Sample sample;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      const auto value = parse_double(fields[column[j]]);
      if (!value) {
        throw RowError(line_no, "cannot parse " + schema.names[j] + " value '" +
                                    std::string(fields[column[j]]) + "'");
      }
      sample.features[j] = *value;
    }
    if (const std::string violation = sample_violation(sample.features); !violation.empty()) {
      throw RowError(line_no, violation);
    }
    if (label_column && !fields[*label_column].empty()) {
      const auto label = find_class(dataset.classes, fields[*label_column]);
      if (!label) {
        throw LabelError("line " + std::to_string(line_no) + ": unknown crop label '" +
                         std::string(fields[*label_column]) + "'");
      }
      sample.label = *label;
    }
    dataset.samples.push_back(sample);
  }
  if (!have_header) throw SchemaError("CSV has no header row");
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path.string() + "'");
  return load_dataset(in, schema);
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (std::size_t j = 0; j < kNumFeatures; ++j) out << dataset.schema.names[j] << ',';
  out << dataset.schema.label_name << '\n';
  char buf[32];
  for (const auto& s : dataset.samples) {
    // Shortest text that parses back to the same double.
    for (double v : s.features) {
      const auto r = std::to_chars(buf, buf + sizeof buf, v);
      out.write(buf, r.ptr - buf) << ',';
    }
    if (s.label) out << dataset.classes[static_cast<std::size_t>(*s.label)];
    out << '\n';
  }
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& dataset) {
  std::vector<std::vector<std::size_t>> by_class(dataset.classes.size());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& label = dataset.samples[i].label;
    if (!label) throw SplitError("sample " + std::to_string(i) + " is unlabeled");
    by_class[static_cast<std::size_t>(*label)].push_back(i);
  }
  return by_class;
}

}  // namespace

Split stratified_split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw SplitError("test fraction must lie in (0, 1)");
  }
  auto by_class = indices_by_class(dataset);
  Rng rng(seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    const auto n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(idx.size()) * test_fraction));
    if (n_test == 0 || n_test == idx.size()) {
      throw SplitError("class '" + dataset.classes[c] + "' with " + std::to_string(idx.size()) +
                       " samples leaves an empty side at fraction " +
                       std::to_string(test_fraction));
    }
    rng.shuffle(idx);
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + static_cast<long>(n_test));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<long>(n_test), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {dataset.subset(train_idx), dataset.subset(test_idx)};
}

std::vector<std::vector<std::size_t>> stratified_folds(const Dataset& dataset, std::size_t folds,
                                                       std::uint64_t seed) {
  if (folds < 2) throw ConfigError("need at least 2 folds");
  auto by_class = indices_by_class(dataset);
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> out(folds);
  std::size_t next = 0;
  for (auto& idx : by_class) {
    rng.shuffle(idx);
    for (std::size_t i : idx) out[next++ % folds].push_back(i);
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

Dataset stratified_sample(const Dataset& dataset, std::size_t count, std::uint64_t seed) {
  if (count >= dataset.size()) return dataset;
  auto by_class = indices_by_class(dataset);
  const double total = static_cast<double>(dataset.size());

  std::vector<std::size_t> quota(by_class.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const double exact = static_cast<double>(count) * static_cast<double>(by_class[c].size()) / total;
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < count && r < remainders.size(); ++r) {
    ++quota[remainders[r].second];
    ++assigned;
  }

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    rng.shuffle(idx);
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<long>(quota[c]));
  }
  std::sort(chosen.begin(), chosen.end());
  return dataset.subset(chosen);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw InputError("quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

FeatureStats compute_stats(const Dataset& dataset) {
  if (dataset.empty()) throw InputError("cannot compute statistics of an empty dataset");
  FeatureStats stats;
  stats.count = dataset.size();
  const double n = static_cast<double>(dataset.size());
  std::vector<double> column(dataset.size());
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    for (std::size_t i = 0; i < dataset.size(); ++i) column[i] = dataset.samples[i].features[j];
    std::sort(column.begin(), column.end());
    FeatureSummary& f = stats.features[j];
    f.min = column.front();
    f.max = column.back();
    f.mean = std::accumulate(column.begin(), column.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : column) ss += (v - f.mean) * (v - f.mean);
    f.std = std::sqrt(ss / n);
    f.q1 = quantile_sorted(column, 0.25);
    f.median = quantile_sorted(column, 0.5);
    f.q3 = quantile_sorted(column, 0.75);
    std::vector<double> deviation(column.size());
    std::transform(column.begin(), column.end(), deviation.begin(),
                   [&](double v) { return std::abs(v - f.median); });
    std::sort(deviation.begin(), deviation.end());
    f.mad = quantile_sorted(deviation, 0.5);
  }
  return stats;
}

Scaler Scaler::fit(const Dataset& train) {
  if (train.empty()) throw InputError("cannot fit a scaler on an empty dataset");
  const double n = static_cast<double>(train.size());
  FeatureVector mean{};
  FeatureVector scale{};
  for (const auto& s : train.samples) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) mean[j] += s.features[j];
  }
  for (double& m : mean) m /= n;
  for (const auto& s : train.samples) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      scale[j] += (s.features[j] - mean[j]) * (s.features[j] - mean[j]);
    }
  }
  for (double& v : scale) {
    v = std::sqrt(v / n);
    if (!(v > 1e-12)) v = 1.0;
  }
  return {mean, scale};
}

FeatureVector Scaler::apply(const FeatureVector& x) const {
  FeatureVector z;
  for (std::size_t j = 0; j < kNumFeatures; ++j) z[j] = (x[j] - mean_[j]) / scale_[j];
  return z;
}

FeatureVector Scaler::invert(const FeatureVector& z) const {
  FeatureVector x;
  for (std::size_t j = 0; j < kNumFeatures; ++j) x[j] = z[j] * scale_[j] + mean_[j];
  return x;
}

}  // namespace cropxai
