#pragma once

#include <cstdint>

#include "cropxai/attribution.hpp"
#include "cropxai/model.hpp"

namespace cropxai {

// Mean accuracy drop (as a fraction) over `repeats` shuffles of each
// column. `baseline` is the unshuffled accuracy.
Attribution permutation_importance(const Classifier& model, const Dataset& data, std::size_t repeats,
                                   std::uint64_t seed);

// Split gains summed per feature over every tree, normalised to sum to 1.
// DT, RF and LGBM only.
Attribution gain_importance(const TrainedModel& model);

// Parent-to-child value changes along each tree's decision path. DT/RF
// work in probability space, LGBM in pre-softmax margin space
// (metadata.space says which).
Attribution path_contributions(const TrainedModel& model, const FeatureVector& x, int target);

}  // namespace cropxai
