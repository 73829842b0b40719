#pragma once

// Pinned world constants and the benchmark they were calibrated on. The
// file written by the calibrate tool is the single source for both the
// CLI defaults (when passed --config) and the regression test.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "agla/pipeline.hpp"
#include "agla/toy_model.hpp"

namespace agla {

nlohmann::json world_config_to_json(const toy::WorldConfig& cfg);
/// Missing keys keep their defaults; wrong types are an InputError.
toy::WorldConfig world_config_from_json(const nlohmann::json& j);

nlohmann::json bench_config_to_json(const BenchConfig& cfg);
BenchConfig bench_config_from_json(const nlohmann::json& j);

struct Calibration {
  toy::WorldConfig world;
  BenchConfig bench;
  nlohmann::json expected;  // scores_json of the pinned run
};

nlohmann::json calibration_to_json(const Calibration& c);
Calibration calibration_from_json(const nlohmann::json& j);
Calibration load_calibration(const std::filesystem::path& path);

}  // namespace agla
