#include "cropxai/shapley.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <map>

#include "cropxai/error.hpp"
#include "cropxai/parallel.hpp"
#include "cropxai/rng.hpp"

namespace cropxai {

namespace {

constexpr unsigned kFullMask = kNumCoalitions - 1;
constexpr int kM = static_cast<int>(kNumFeatures);

void check_inputs(const Classifier& model, const FeatureVector& x,
                  const std::vector<FeatureVector>& background, int target) {
  if (background.empty()) throw InputError("background set is empty");
  if (target < 0 || static_cast<std::size_t>(target) >= model.num_classes()) {
    throw InputError("target class index " + std::to_string(target) + " out of range");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("feature values must be finite");
  }
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

// Values for the listed masks, computed in parallel; deterministic.
std::map<unsigned, double> coalition_values(const Classifier& model, const FeatureVector& x,
                                            const std::vector<FeatureVector>& background, int target,
                                            const std::vector<unsigned>& masks) {
  std::vector<double> values(masks.size());
  parallel_for(masks.size(), [&](std::size_t i) {
    values[i] = masks[i] == kFullMask ? model.predict_proba(x)[static_cast<std::size_t>(target)]
                                      : coalition_value(model, x, background, target, masks[i]);
  });
  std::map<unsigned, double> out;
  for (std::size_t i = 0; i < masks.size(); ++i) out[masks[i]] = values[i];
  return out;
}

}  // namespace

double coalition_value(const Classifier& model, const FeatureVector& x,
                       const std::vector<FeatureVector>& background, int target, unsigned mask) {
  std::vector<double> proba(model.num_classes());
  double sum = 0.0;
  for (const FeatureVector& b : background) {
    FeatureVector z = b;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      if (mask & (1u << j)) z[j] = x[j];
    }
    model.predict_proba(z, proba);
    sum += proba[static_cast<std::size_t>(target)];
  }
  return sum / static_cast<double>(background.size());
}

Attribution shapley_exact(const Classifier& model, const FeatureVector& x,
                          const std::vector<FeatureVector>& background, int target) {
  check_inputs(model, x, background, target);
  std::vector<unsigned> masks(kNumCoalitions);
  for (unsigned m = 0; m < kNumCoalitions; ++m) masks[m] = m;
  const auto v = coalition_values(model, x, background, target, masks);

  std::array<double, kNumFeatures + 1> weight{};  // by coalition size without j
  for (int s = 0; s < kM; ++s) weight[static_cast<std::size_t>(s)] = factorial(s) * factorial(kM - s - 1) / factorial(kM);

  Attribution a;
  a.method = Method::shapley_exact;
  a.target = target;
  a.baseline = v.at(0);
  a.output = v.at(kFullMask);
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    const unsigned bit = 1u << j;
    double phi = 0.0;
    for (unsigned m = 0; m < kNumCoalitions; ++m) {
      if (m & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(m))] * (v.at(m | bit) - v.at(m));
    }
    a.contributions[j] = phi;
  }
  a.metadata = {{"background_size", background.size()}, {"coalitions", kNumCoalitions}};
  return a;
}

Attribution shapley_kernel(const Classifier& model, const FeatureVector& x,
                           const std::vector<FeatureVector>& background, int target,
                           std::size_t n_samples, std::uint64_t seed) {
  check_inputs(model, x, background, target);
  if (n_samples < 2 * kNumFeatures + 2) {
    throw ConfigError("kernel Shapley needs at least " + std::to_string(2 * kNumFeatures + 2) +
                      " coalition samples");
  }

  // Coalition -> weight in the regression.
  std::map<unsigned, double> design;
  const bool enumerate = n_samples >= kNumCoalitions - 2;
  if (enumerate) {
    for (unsigned m = 1; m < kFullMask; ++m) {
      const int s = std::popcount(m);
      design[m] = (kM - 1) / (binomial(kM, s) * s * (kM - s));
    }
  } else {
    std::array<double, kNumFeatures> size_mass{};
    double total = 0.0;
    for (int s = 1; s < kM; ++s) {
      size_mass[static_cast<std::size_t>(s)] = (kM - 1.0) / (s * (kM - s));
      total += size_mass[static_cast<std::size_t>(s)];
    }
    Rng rng(seed);
    for (std::size_t draw = 0; draw < n_samples; ++draw) {
      double u = rng.uniform() * total;
      int s = 1;
      while (s < kM - 1 && u >= size_mass[static_cast<std::size_t>(s)]) {
        u -= size_mass[static_cast<std::size_t>(s)];
        ++s;
      }
      std::vector<std::size_t> features(kNumFeatures);
      for (std::size_t j = 0; j < kNumFeatures; ++j) features[j] = j;
      rng.shuffle(features);
      unsigned m = 0;
      for (int i = 0; i < s; ++i) m |= 1u << features[static_cast<std::size_t>(i)];
      design[m] += 1.0;
    }
  }

  std::vector<unsigned> masks{0u, kFullMask};
  for (const auto& [m, w] : design) masks.push_back(m);
  const auto v = coalition_values(model, x, background, target, masks);
  const double base = v.at(0);
  const double full = v.at(kFullMask);
  const double delta = full - base;

  // Eliminate the last feature through the efficiency constraint.
  constexpr std::size_t last = kNumFeatures - 1;
  const auto rows = static_cast<Eigen::Index>(design.size());
  Eigen::MatrixXd a(rows, static_cast<Eigen::Index>(last));
  Eigen::VectorXd b(rows);
  Eigen::Index r = 0;
  for (const auto& [m, w] : design) {
    const double sw = std::sqrt(w);
    const double z_last = (m >> last) & 1u;
    for (std::size_t j = 0; j < last; ++j) {
      a(r, static_cast<Eigen::Index>(j)) = sw * (static_cast<double>((m >> j) & 1u) - z_last);
    }
    b(r) = sw * (v.at(m) - base - z_last * delta);
    ++r;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < static_cast<Eigen::Index>(last)) {
    throw NumericalError("sampled coalitions do not identify every feature; increase n_samples");
  }
  const Eigen::VectorXd beta = qr.solve(b);

  Attribution out;
  out.method = Method::shapley_kernel;
  out.target = target;
  out.baseline = base;
  out.output = full;
  double partial = 0.0;
  for (std::size_t j = 0; j < last; ++j) {
    out.contributions[j] = beta(static_cast<Eigen::Index>(j));
    partial += out.contributions[j];
  }
  out.contributions[last] = delta - partial;
  out.metadata = {{"background_size", background.size()},
                  {"coalitions", design.size()},
                  {"enumerated", enumerate},
                  {"seed", seed}};
  return out;
}

}  // namespace cropxai
