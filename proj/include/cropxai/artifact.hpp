#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cropxai/model.hpp"

namespace cropxai {

inline constexpr int kArtifactFormatVersion = 1;

// Field names follow the parameter names used on the command line. Missing
// keys keep the kind's default; unknown keys raise ConfigError.
nlohmann::json hyperparameters_to_json(const Hyperparameters& params);
Hyperparameters hyperparameters_from_json(ModelKind kind, const nlohmann::json& j);

nlohmann::json schema_to_json(const FeatureSchema& schema);
nlohmann::json stats_to_json(const FeatureStats& stats);
FeatureStats stats_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const TrainedModel& model);
// Throws ArtifactError on any structural problem.
TrainedModel model_from_json(const nlohmann::json& j);

// Compact JSON text. Doubles are written in shortest round-trip form, so
// a loaded model predicts bit-identically to the saved one.
std::string save_model(const TrainedModel& model);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(std::string_view bytes);
TrainedModel load_model_file(const std::filesystem::path& path);

}  // namespace cropxai
