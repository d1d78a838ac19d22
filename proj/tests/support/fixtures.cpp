#include "support/fixtures.hpp"

#include <map>
#include <mutex>
#include <random>

#include "support/synthetic_crops.hpp"

namespace cropxai::testing {

std::filesystem::path fixture_csv() { return std::filesystem::path(CROPXAI_TEST_DATA_DIR) / "crops_fixture.csv"; }

Dataset fixture_dataset() { return load_dataset(fixture_csv()); }

const Dataset& synthetic_full() {
  static const Dataset data = synthetic_crops(100, 7);
  return data;
}

const Split& synthetic_split() {
  static const Split split = stratified_split(synthetic_full(), 0.3, 42);
  return split;
}

const TrainedModel& trained(ModelKind kind) {
  static std::mutex mutex;
  static std::map<ModelKind, TrainedModel> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(kind);
  if (it == cache.end()) {
    it = cache.emplace(kind, train_model(kind, synthetic_split().train, 42)).first;
  }
  return it->second;
}

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() / ("cropxai-" + tag + "-" + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace cropxai::testing
