#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cropxai/error.hpp"
#include "cropxai/learners.hpp"

namespace cropxai {

namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

void activate(MatrixXd& a, Activation act) {
  if (act == Activation::relu) {
    a = a.cwiseMax(0.0);
  } else {
    a = a.array().tanh().matrix();
  }
}

// Multiplies `delta` in place by the activation derivative evaluated from
// the activation output.
void activation_backward(MatrixXd& delta, const MatrixXd& out, Activation act) {
  if (act == Activation::relu) {
    delta = delta.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
  } else {
    delta = delta.cwiseProduct((1.0 - out.array().square()).matrix());
  }
}

void softmax_rows(MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double top = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - top).exp().matrix();
    m.row(r) /= m.row(r).sum();
  }
}

struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<MatrixXd> mw, vw;
  std::vector<RowVectorXd> mb, vb;
  long t = 0;

  explicit Adam(const MlpNetwork& net) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      mw.push_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
      vw.push_back(mw.back());
      mb.push_back(RowVectorXd::Zero(net.biases[l].size()));
      vb.push_back(mb.back());
    }
  }

  void step(MlpNetwork& net, const MlpNetwork& grad, double lr) {
    ++t;
    const double rate = lr * std::sqrt(1.0 - std::pow(beta2, static_cast<double>(t))) /
                        (1.0 - std::pow(beta1, static_cast<double>(t)));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      mw[l] = beta1 * mw[l] + (1.0 - beta1) * grad.weights[l];
      vw[l] = beta2 * vw[l] + (1.0 - beta2) * grad.weights[l].cwiseAbs2();
      net.weights[l].array() -= rate * mw[l].array() / (vw[l].array().sqrt() + epsilon);
      mb[l] = beta1 * mb[l] + (1.0 - beta1) * grad.biases[l];
      vb[l] = beta2 * vb[l] + (1.0 - beta2) * grad.biases[l].cwiseAbs2();
      net.biases[l].array() -= rate * mb[l].array() / (vb[l].array().sqrt() + epsilon);
    }
  }
};

// Nesterov momentum SGD.
struct Momentum {
  double momentum = 0.9;
  std::vector<MatrixXd> vw;
  std::vector<RowVectorXd> vb;

  explicit Momentum(const MlpNetwork& net) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      vw.push_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
      vb.push_back(RowVectorXd::Zero(net.biases[l].size()));
    }
  }

  void step(MlpNetwork& net, const MlpNetwork& grad, double lr) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      vw[l] = momentum * vw[l] - lr * grad.weights[l];
      net.weights[l] += momentum * vw[l] - lr * grad.weights[l];
      vb[l] = momentum * vb[l] - lr * grad.biases[l];
      net.biases[l] += momentum * vb[l] - lr * grad.biases[l];
    }
  }
};

}  // namespace

MatrixXd MlpNetwork::forward(const MatrixXd& inputs) const {
  MatrixXd a = inputs;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    MatrixXd next = a * weights[l];
    next.rowwise() += biases[l];
    if (l + 1 < weights.size()) activate(next, activation);
    a = std::move(next);
  }
  softmax_rows(a);
  return a;
}

double MlpNetwork::loss_and_gradient(const MatrixXd& inputs, const std::vector<int>& labels,
                                     double alpha, MlpNetwork* grad) const {
  const std::size_t layers = weights.size();
  const auto batch = static_cast<double>(inputs.rows());
  std::vector<MatrixXd> acts;
  acts.reserve(layers + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < layers; ++l) {
    MatrixXd next = acts.back() * weights[l];
    next.rowwise() += biases[l];
    if (l + 1 < layers) activate(next, activation);
    acts.push_back(std::move(next));
  }
  MatrixXd& out = acts.back();
  softmax_rows(out);

  double loss = 0.0;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double p = out(r, labels[static_cast<std::size_t>(r)]);
    loss -= std::log(std::max(p, 1e-300));
  }
  loss /= batch;
  double penalty = 0.0;
  for (const auto& w : weights) penalty += w.squaredNorm();
  loss += 0.5 * alpha * penalty / batch;

  if (grad == nullptr) return loss;
  grad->activation = activation;
  grad->weights.resize(layers);
  grad->biases.resize(layers);
  MatrixXd delta = out;
  for (Eigen::Index r = 0; r < delta.rows(); ++r) delta(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
  delta /= batch;
  for (std::size_t l = layers; l-- > 0;) {
    grad->weights[l] = acts[l].transpose() * delta + (alpha / batch) * weights[l];
    grad->biases[l] = delta.colwise().sum();
    if (l > 0) {
      MatrixXd back = delta * weights[l].transpose();
      activation_backward(back, acts[l], activation);
      delta = std::move(back);
    }
  }
  return loss;
}

std::size_t MlpNetwork::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

bool operator==(const MlpNetwork& a, const MlpNetwork& b) {
  if (a.activation != b.activation || a.weights.size() != b.weights.size()) return false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (a.weights[l].rows() != b.weights[l].rows() || a.weights[l].cols() != b.weights[l].cols() ||
        a.weights[l] != b.weights[l] || a.biases[l].size() != b.biases[l].size() ||
        a.biases[l] != b.biases[l]) {
      return false;
    }
  }
  return true;
}

MlpNetwork init_network(std::size_t n_inputs, const std::vector<int>& hidden, std::size_t n_outputs,
                        Activation activation, std::uint64_t seed) {
  MlpNetwork net;
  net.activation = activation;
  std::vector<std::size_t> sizes{n_inputs};
  for (int h : hidden) sizes.push_back(static_cast<std::size_t>(h));
  sizes.push_back(n_outputs);
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
    MatrixXd w(static_cast<Eigen::Index>(sizes[l]), static_cast<Eigen::Index>(sizes[l + 1]));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
    }
    RowVectorXd b(static_cast<Eigen::Index>(sizes[l + 1]));
    for (Eigen::Index j = 0; j < b.size(); ++j) b(j) = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

MlpFit fit_mlp(const LabeledMatrix& data, const MlpParams& params, std::uint64_t seed) {
  MlpFit fit;
  Dataset tmp;
  for (const auto& row : data.x) tmp.samples.push_back({row, std::nullopt});
  fit.scaler = Scaler::fit(tmp);
  fit.active = data.active;

  const std::size_t n = data.x.size();
  const std::vector<int> y = data.local_labels();
  MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureVector row = fit.scaler.apply(data.x[i]);
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }

  fit.network = init_network(kNumFeatures, params.hidden_layer_sizes, data.active.size(),
                             params.activation, derive_seed(seed, 0));
  MlpNetwork& net = fit.network;
  Adam adam(net);
  Momentum momentum(net);
  Rng rng(derive_seed(seed, 1));

  const auto batch = std::min(static_cast<std::size_t>(params.batch_size), n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  double lr = params.learning_rate_init;
  double best_loss = std::numeric_limits<double>::infinity();
  int no_improvement = 0;
  MlpNetwork grad;
  MatrixXd xb;
  std::vector<int> yb;

  for (int epoch = 0; epoch < params.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(start + batch, n);
      xb.resize(static_cast<Eigen::Index>(end - start), static_cast<Eigen::Index>(kNumFeatures));
      yb.resize(end - start);
      for (std::size_t r = start; r < end; ++r) {
        xb.row(static_cast<Eigen::Index>(r - start)) = z.row(static_cast<Eigen::Index>(order[r]));
        yb[r - start] = y[order[r]];
      }
      const double loss = net.loss_and_gradient(xb, yb, params.alpha, &grad);
      epoch_loss += loss * static_cast<double>(end - start);
      if (params.solver == Solver::adam) {
        adam.step(net, grad, lr);
      } else {
        momentum.step(net, grad, lr);
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw NumericalError("MLP training diverged");
    fit.loss_curve.push_back(epoch_loss);

    if (epoch_loss > best_loss - params.tol) {
      ++no_improvement;
    } else {
      no_improvement = 0;
    }
    best_loss = std::min(best_loss, epoch_loss);
    if (params.solver == Solver::sgd && params.schedule == LearningRateSchedule::adaptive) {
      if (no_improvement > 2) {
        lr /= 5.0;
        no_improvement = 0;
        if (lr < 1e-6) break;
      }
    } else if (no_improvement >= params.n_iter_no_change) {
      break;
    }
  }
  return fit;
}

void mlp_proba_active(const MlpFit& fit, const FeatureVector& x, std::span<double> out) {
  const FeatureVector z = fit.scaler.apply(x);
  const MlpNetwork& net = fit.network;
  Eigen::RowVectorXd a(static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t j = 0; j < kNumFeatures; ++j) a(static_cast<Eigen::Index>(j)) = z[j];
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Eigen::RowVectorXd next = a * net.weights[l] + net.biases[l];
    if (l + 1 < net.weights.size()) {
      if (net.activation == Activation::relu) {
        next = next.cwiseMax(0.0);
      } else {
        next = next.array().tanh().matrix();
      }
    }
    a = std::move(next);
  }
  for (Eigen::Index c = 0; c < a.size(); ++c) out[static_cast<std::size_t>(c)] = a(c);
}

}  // namespace cropxai
