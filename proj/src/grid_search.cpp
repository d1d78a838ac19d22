#include "cropxai/grid_search.hpp"

#include "cropxai/error.hpp"
#include "cropxai/model.hpp"
#include "cropxai/parallel.hpp"

namespace cropxai {

namespace {

std::vector<int> int_range(int lo, int hi, int stride) {
  std::vector<int> out;
  for (int v = lo; v <= hi; v += stride) out.push_back(v);
  if (out.back() != hi) out.push_back(hi);
  return out;
}

}  // namespace

std::vector<Hyperparameters> paper_grid(ModelKind kind, int stride) {
  if (stride < 1) throw ConfigError("grid stride must be >= 1");
  std::vector<Hyperparameters> grid;
  switch (kind) {
    case ModelKind::knn:
      for (int n : int_range(10, 50, stride)) {
        for (Metric m : {Metric::euclidean, Metric::cityblock}) grid.push_back(KnnParams{n, m});
      }
      break;
    case ModelKind::rf:
      for (int depth : int_range(5, 10, 1)) {
        for (int trees : int_range(10, 150, stride)) {
          for (Criterion c : {Criterion::gini, Criterion::entropy}) {
            RfParams p;
            p.max_depth = depth;
            p.n_estimators = trees;
            p.criterion = c;
            grid.push_back(p);
          }
        }
      }
      break;
    case ModelKind::dt:
      for (int depth : int_range(10, 150, stride)) {
        for (Criterion c : {Criterion::gini, Criterion::entropy}) {
          for (Splitter s : {Splitter::best, Splitter::random}) {
            for (int split = 2; split <= 12; split += 2) grid.push_back(DtParams{depth, c, s, split});
          }
        }
      }
      break;
    case ModelKind::svm:
      for (double c : {0.001, 1.0}) {
        for (double gamma : {0.01, 0.1}) {
          SvmParams p;
          p.kernel = Kernel::rbf;
          p.c = c;
          p.gamma = gamma;
          grid.push_back(p);
        }
      }
      for (double c : {0.001, 0.01, 0.1}) {
        SvmParams p;
        p.kernel = Kernel::linear;
        p.c = c;
        grid.push_back(p);
      }
      break;
    case ModelKind::lgbm:
      for (int leaves : int_range(5, 20, stride)) {
        for (double lr : {0.1, 0.01, 0.001}) {
          for (int rounds : int_range(10, 50, stride)) {
            LgbmParams p;
            p.num_leaves = leaves;
            p.learning_rate = lr;
            p.n_estimators = rounds;
            grid.push_back(p);
          }
        }
      }
      break;
    case ModelKind::mlp: {
      const std::vector<std::vector<int>> layers{{10, 10}, {10, 20},     {10, 30},
                                                 {10, 40}, {10, 30, 10}, {10, 30, 50, 25}};
      for (Activation a : {Activation::tanh, Activation::relu}) {
        for (LearningRateSchedule s : {LearningRateSchedule::constant, LearningRateSchedule::adaptive}) {
          for (Solver solver : {Solver::sgd, Solver::adam}) {
            for (double alpha : {0.0001, 0.001, 0.1, 0.2, 0.3, 0.4, 0.5}) {
              for (const auto& h : layers) {
                MlpParams p;
                p.activation = a;
                p.schedule = s;
                p.solver = solver;
                p.alpha = alpha;
                p.hidden_layer_sizes = h;
                grid.push_back(p);
              }
            }
          }
        }
      }
      break;
    }
  }
  return grid;
}

GridSearchResult grid_search(const std::vector<Hyperparameters>& grid, const Dataset& train,
                             std::size_t folds, std::uint64_t seed) {
  if (grid.empty()) throw ConfigError("grid is empty");
  const ModelKind kind = kind_of(grid.front());
  for (const auto& p : grid) {
    if (kind_of(p) != kind) throw ConfigError("grid mixes model kinds");
    validate(p);
  }
  for (const Sample& s : train.samples) {
    if (!s.label) throw InputError("grid search needs a fully labeled training set");
  }
  const auto fold_indices = stratified_folds(train, folds, seed);
  std::vector<Dataset> fold_train(folds);
  std::vector<Dataset> fold_valid(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<bool> in_valid(train.size(), false);
    for (std::size_t i : fold_indices[f]) in_valid[i] = true;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (!in_valid[i]) rest.push_back(i);
    }
    fold_train[f] = train.subset(rest);
    fold_valid[f] = train.subset(fold_indices[f]);
  }

  GridSearchResult result;
  result.folds = folds;
  result.seed = seed;
  result.candidates.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t g) {
    double sum = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
      const TrainedModel m = train_model(grid[g], fold_train[f], seed);
      std::size_t correct = 0;
      for (const Sample& s : fold_valid[f].samples) correct += m.predict(s.features) == *s.label;
      sum += 100.0 * static_cast<double>(correct) / static_cast<double>(fold_valid[f].size());
    }
    result.candidates[g] = {grid[g], sum / static_cast<double>(folds)};
  });

  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (result.candidates[g].mean_accuracy > result.candidates[best].mean_accuracy) best = g;
  }
  result.best = grid[best];
  return result;
}

}  // namespace cropxai
