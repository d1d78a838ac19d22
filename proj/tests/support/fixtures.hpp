#pragma once

#include <filesystem>
#include <string>

#include "cropxai/data.hpp"
#include "cropxai/model.hpp"

namespace cropxai::testing {

// The bundled 4-crop fixture CSV (10 rows per crop).
std::filesystem::path fixture_csv();
Dataset fixture_dataset();

// Synthetic 22-crop data, 100 rows per crop, and its 70/30 split (seed 42).
const Dataset& synthetic_full();
const Split& synthetic_split();

// Shipped-default model of each kind trained once on synthetic_split().train.
const TrainedModel& trained(ModelKind kind);

// The instance used throughout the counterfactual and attribution examples.
inline constexpr FeatureVector kPapayaInstance{44, 60, 55, 34.28046, 90.555618, 6.825371, 98.540474};

// Fresh directory under the system temp dir, removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace cropxai::testing
