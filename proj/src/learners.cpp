#include "cropxai/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cropxai/error.hpp"

namespace cropxai {

LabeledMatrix LabeledMatrix::from(const Dataset& data) {
  LabeledMatrix m;
  m.n_classes = data.num_classes();
  m.x.reserve(data.size());
  m.y.reserve(data.size());
  std::vector<bool> present(m.n_classes, false);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    if (!s.label) throw InputError("training sample " + std::to_string(i) + " is unlabeled");
    m.x.push_back(s.features);
    m.y.push_back(*s.label);
    present[static_cast<std::size_t>(*s.label)] = true;
  }
  for (std::size_t c = 0; c < m.n_classes; ++c) {
    if (present[c]) m.active.push_back(static_cast<int>(c));
  }
  return m;
}

std::vector<int> LabeledMatrix::local_labels() const {
  std::vector<int> lookup(n_classes, -1);
  for (std::size_t k = 0; k < active.size(); ++k) lookup[static_cast<std::size_t>(active[k])] = static_cast<int>(k);
  std::vector<int> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = lookup[static_cast<std::size_t>(y[i])];
  return out;
}

void scatter_softmax(std::span<const double> margins, const std::vector<int>& active,
                     std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  double top = -std::numeric_limits<double>::infinity();
  for (double m : margins) top = std::max(top, m);
  double total = 0.0;
  for (std::size_t k = 0; k < margins.size(); ++k) {
    const double e = std::exp(margins[k] - top);
    out[static_cast<std::size_t>(active[k])] = e;
    total += e;
  }
  for (int c : active) out[static_cast<std::size_t>(c)] /= total;
}

KnnFit fit_knn(const LabeledMatrix& data) {
  KnnFit fit;
  Dataset tmp;
  tmp.samples.reserve(data.x.size());
  for (const auto& row : data.x) tmp.samples.push_back({row, std::nullopt});
  fit.scaler = Scaler::fit(tmp);
  fit.points.reserve(data.x.size());
  for (const auto& row : data.x) fit.points.push_back(fit.scaler.apply(row));
  fit.labels = data.y;
  return fit;
}

void knn_proba(const KnnFit& fit, const KnnParams& params, const FeatureVector& x,
               std::span<double> out) {
  const FeatureVector z = fit.scaler.apply(x);
  std::vector<std::pair<double, std::size_t>> dist(fit.points.size());
  for (std::size_t i = 0; i < fit.points.size(); ++i) {
    const auto& p = fit.points[i];
    double d = 0.0;
    if (params.metric == Metric::cityblock) {
      for (std::size_t j = 0; j < kNumFeatures; ++j) d += std::abs(p[j] - z[j]);
    } else {
      for (std::size_t j = 0; j < kNumFeatures; ++j) d += (p[j] - z[j]) * (p[j] - z[j]);
    }
    dist[i] = {d, i};
  }
  const std::size_t k = std::min(static_cast<std::size_t>(params.n_neighbours), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    out[static_cast<std::size_t>(fit.labels[dist[i].second])] += 1.0;
  }
  for (double& v : out) v /= static_cast<double>(k);
}

}  // namespace cropxai
