#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mvdelay/model.hpp"

namespace mvdelay {

/// {"h": ..., "delay_steps": ..., "horizon_steps": ...}
TimeGrid grid_from_json(const nlohmann::json& j);
/// {"name": "point"|"gaussian"|"brownian_history", "params": {"location", "scale"}}
InitialSampler initial_from_json(const nlohmann::json& j, std::size_t dim);
/// Full scenario document; validated before returning.
Scenario scenario_from_json(const nlohmann::json& j);

nlohmann::json load_json_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);
/// SHA-256 of the compact dump of j (object keys are kept sorted, so equal
/// documents hash equally regardless of the source formatting).
std::string config_hash(const nlohmann::json& j);

}  // namespace mvdelay
