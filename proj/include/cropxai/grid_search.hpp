#pragma once

#include <cstdint>
#include <vector>

#include "cropxai/data.hpp"
#include "cropxai/hyperparameters.hpp"

namespace cropxai {

// The published search space for a model kind. Integer ranges are walked
// with `stride` (1 = every value) so coarse searches stay affordable; the
// range end points are always included.
std::vector<Hyperparameters> paper_grid(ModelKind kind, int stride = 1);

struct GridPoint {
  Hyperparameters params;
  double mean_accuracy = 0.0;  // percent
};

struct GridSearchResult {
  Hyperparameters best;
  std::vector<GridPoint> candidates;  // grid order
  std::size_t folds = 0;
  std::uint64_t seed = 0;
};

// Stratified k-fold mean validation accuracy for every grid point; the
// best is the first point with the highest score. Throws ConfigError on
// an empty grid, mixed model kinds, or folds < 2.
GridSearchResult grid_search(const std::vector<Hyperparameters>& grid, const Dataset& train,
                             std::size_t folds, std::uint64_t seed);

}  // namespace cropxai
