// One-vs-one C-SVMs on raw features, each pair solved exactly with SMO
// (second-order working set selection, unregularised bias):
//   min_a 1/2 a'Qa - e'a   s.t. 0 <= a_i <= C,  y'a = 0,  Q_ij = y_i y_j K_ij.
#include <algorithm>
#include <cmath>
#include <limits>

#include "cropxai/error.hpp"
#include "cropxai/learners.hpp"
#include "cropxai/parallel.hpp"

namespace cropxai {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double kernel_value(Kernel kernel, double gamma, const FeatureVector& a, const FeatureVector& b) {
  if (kernel == Kernel::linear) {
    double d = 0.0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) d += a[j] * b[j];
    return d;
  }
  double d = 0.0;
  for (std::size_t j = 0; j < kNumFeatures; ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
  return std::exp(-gamma * d);
}

struct BinarySolution {
  std::vector<double> alpha;
  double rho = 0.0;
};

BinarySolution solve_binary(const std::vector<double>& k, const std::vector<double>& y, double c,
                            double eps, std::size_t max_iter) {
  const std::size_t n = y.size();
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  auto upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };
  auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * k[i * n + j]; };

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    double gmax = -kInf;
    double gmax2 = -kInf;
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          i = t;
        }
      } else if (!lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        i = t;
      }
    }
    if (i == n) break;

    std::size_t j = n;
    double best_obj = kInf;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (lower(t)) continue;
        const double diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (diff > 0) {
          double quad = k[i * n + i] + k[t * n + t] - 2.0 * y[i] * q(i, t);
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best_obj) {
            best_obj = obj;
            j = t;
          }
        }
      } else {
        if (upper(t)) continue;
        const double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0) {
          double quad = k[i * n + i] + k[t * n + t] + 2.0 * y[i] * q(i, t);
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best_obj) {
            best_obj = obj;
            j = t;
          }
        }
      }
    }
    if (gmax + gmax2 < eps || j == n) break;

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = k[i * n + i] + k[j * n + j] + 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = k[i * n + i] + k[j * n + j] - 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
  }

  double ub = kInf;
  double lb = -kInf;
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  BinarySolution out;
  out.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  out.alpha = std::move(alpha);
  return out;
}

}  // namespace

SvmFit fit_svm(const LabeledMatrix& data, const SvmParams& params) {
  SvmFit fit;
  fit.active = data.active;
  fit.kernel = params.kernel;
  fit.gamma = params.kernel == Kernel::rbf ? params.gamma : 0.0;

  const std::size_t k = data.active.size();
  const std::vector<int> y = data.local_labels();
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < y.size(); ++i) members[static_cast<std::size_t>(y[i])].push_back(i);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) pairs.emplace_back(a, b);
  }
  fit.pairs.resize(pairs.size());
  std::vector<std::vector<std::pair<std::size_t, double>>> dual(pairs.size());

  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [a, b] = pairs[p];
    std::vector<std::size_t> rows = members[a];
    rows.insert(rows.end(), members[b].begin(), members[b].end());
    const std::size_t n = rows.size();
    std::vector<double> labels(n);
    for (std::size_t r = 0; r < n; ++r) labels[r] = r < members[a].size() ? 1.0 : -1.0;
    std::vector<double> gram(n * n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t s = r; s < n; ++s) {
        gram[r * n + s] = gram[s * n + r] =
            kernel_value(params.kernel, fit.gamma, data.x[rows[r]], data.x[rows[s]]);
      }
    }
    const BinarySolution sol = solve_binary(gram, labels, params.c, params.tol,
                                            static_cast<std::size_t>(params.max_iter));
    SvmPair& out = fit.pairs[p];
    out.first = static_cast<int>(a);
    out.second = static_cast<int>(b);
    out.bias = -sol.rho;
    for (std::size_t r = 0; r < n; ++r) {
      if (sol.alpha[r] <= 0.0) continue;
      const double coef = sol.alpha[r] * labels[r];
      if (params.kernel == Kernel::linear) {
        for (std::size_t j = 0; j < kNumFeatures; ++j) out.weights[j] += coef * data.x[rows[r]][j];
      } else {
        dual[p].emplace_back(rows[r], coef);
      }
    }
  });

  if (params.kernel == Kernel::rbf) {
    std::vector<int> sv_index(data.x.size(), -1);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      for (const auto& [row, coef] : dual[p]) {
        if (sv_index[row] < 0) {
          sv_index[row] = static_cast<int>(fit.support.size());
          fit.support.push_back(data.x[row]);
        }
        fit.pairs[p].support.push_back(sv_index[row]);
        fit.pairs[p].coef.push_back(coef);
      }
    }
  }
  return fit;
}

void svm_margins(const SvmFit& fit, const FeatureVector& x, std::span<double> margins) {
  const std::size_t k = fit.active.size();
  std::vector<double> kv;
  if (fit.kernel == Kernel::rbf) {
    kv.resize(fit.support.size());
    for (std::size_t s = 0; s < fit.support.size(); ++s) {
      kv[s] = kernel_value(Kernel::rbf, fit.gamma, fit.support[s], x);
    }
  }
  std::vector<double> votes(k, 0.0);
  std::vector<double> confidence(k, 0.0);
  for (const SvmPair& pair : fit.pairs) {
    double d = pair.bias;
    if (fit.kernel == Kernel::linear) {
      for (std::size_t j = 0; j < kNumFeatures; ++j) d += pair.weights[j] * x[j];
    } else {
      for (std::size_t s = 0; s < pair.support.size(); ++s) {
        d += pair.coef[s] * kv[static_cast<std::size_t>(pair.support[s])];
      }
    }
    const auto a = static_cast<std::size_t>(pair.first);
    const auto b = static_cast<std::size_t>(pair.second);
    votes[d > 0 ? a : b] += 1.0;
    confidence[a] += d;
    confidence[b] -= d;
  }
  // Votes decide; summed pairwise margins, squashed into (-1/3, 1/3),
  // only break ties.
  for (std::size_t c = 0; c < k; ++c) {
    margins[c] = votes[c] + confidence[c] / (3.0 * (std::abs(confidence[c]) + 1.0));
  }
}

}  // namespace cropxai
