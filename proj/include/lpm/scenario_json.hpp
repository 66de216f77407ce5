#pragma once

#include "lpm/filters.hpp"
#include "lpm/simulate.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>

namespace lpm {

// Scenario on disk: the flat ScenarioSpec fields plus an optional "filter"
// object. Unknown keys are rejected everywhere so a typo cannot silently
// fall back to a default.
struct ScenarioFile {
  ScenarioSpec scenario;
  std::optional<FilterSpec> filter;
};

nlohmann::json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& j);

nlohmann::json filter_to_json(const FilterSpec& spec);
FilterSpec filter_from_json(const nlohmann::json& j);

// Throws std::runtime_error when the file cannot be read,
// nlohmann::json::exception on malformed JSON, std::invalid_argument on
// unknown keys or out-of-range values.
ScenarioFile load_scenario_file(const std::filesystem::path& path);

void save_scenario_file(const std::filesystem::path& path, const ScenarioSpec& scenario,
                        const std::optional<FilterSpec>& filter = std::nullopt);

}  // namespace lpm
