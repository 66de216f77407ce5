#include "lpm/scenario_json.hpp"

#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace lpm {
namespace {

using nlohmann::json;

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const char* where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("scenario: unknown key '" + item.key() + "' in " + where);
    }
  }
}

json noise_to_json(const NoiseModel& noise) {
  switch (noise.kind) {
    case NoiseModel::Kind::Uniform:
      return json{{"type", "uniform"}, {"max_abs", noise.param}};
    case NoiseModel::Kind::Gaussian:
      return json{{"type", "gaussian"}, {"sigma", noise.param}};
  }
  throw std::logic_error("noise_to_json: unhandled kind");
}

NoiseModel noise_from_json(const json& j) {
  NoiseModel noise;
  const std::string type = j.at("type").get<std::string>();
  if (type == "uniform") {
    require_keys(j, {"type", "max_abs"}, "noise_model");
    noise.kind = NoiseModel::Kind::Uniform;
    noise.param = j.at("max_abs").get<double>();
  } else if (type == "gaussian") {
    require_keys(j, {"type", "sigma"}, "noise_model");
    noise.kind = NoiseModel::Kind::Gaussian;
    noise.param = j.at("sigma").get<double>();
  } else {
    throw std::invalid_argument("scenario: unknown noise_model type '" + type + "'");
  }
  return noise;
}

json offset_to_json(const OffsetModel& offset) {
  switch (offset.kind) {
    case OffsetModel::Kind::Fixed:
      return json{{"type", "fixed"}, {"value", offset.value}};
    case OffsetModel::Kind::PerFrameUniform:
      return json{{"type", "per_frame_uniform"}, {"lo", offset.lo}, {"hi", offset.hi}};
  }
  throw std::logic_error("offset_to_json: unhandled kind");
}

OffsetModel offset_from_json(const json& j) {
  OffsetModel offset;
  const std::string type = j.at("type").get<std::string>();
  if (type == "fixed") {
    require_keys(j, {"type", "value"}, "offset_model");
    offset.kind = OffsetModel::Kind::Fixed;
    offset.value = j.at("value").get<double>();
  } else if (type == "per_frame_uniform") {
    require_keys(j, {"type", "lo", "hi"}, "offset_model");
    offset.kind = OffsetModel::Kind::PerFrameUniform;
    offset.lo = j.at("lo").get<double>();
    offset.hi = j.at("hi").get<double>();
  } else {
    throw std::invalid_argument("scenario: unknown offset_model type '" + type + "'");
  }
  return offset;
}

}  // namespace

json scenario_to_json(const ScenarioSpec& spec) {
  json windows = json::array();
  for (const auto& w : spec.outlier_windows) {
    windows.push_back({{"start_frame", w.start_frame},
                       {"end_frame", w.end_frame},
                       {"station_index", w.station_index},
                       {"magnitude_m", w.magnitude_m}});
  }
  return json{{"dimension", spec.dimension},
              {"station_count", spec.station_count},
              {"station_radius", spec.station_radius},
              {"path_radius", spec.path_radius},
              {"frame_count", spec.frame_count},
              {"noise_model", noise_to_json(spec.noise)},
              {"offset_model", offset_to_json(spec.offset)},
              {"outlier_windows", windows},
              {"seed", spec.seed}};
}

ScenarioSpec scenario_from_json(const json& j) {
  require_keys(j,
               {"dimension", "station_count", "station_radius", "path_radius",
                "frame_count", "noise_model", "offset_model", "outlier_windows", "seed"},
               "scenario");
  ScenarioSpec spec;
  if (j.contains("dimension")) spec.dimension = j.at("dimension").get<int>();
  if (j.contains("station_count")) spec.station_count = j.at("station_count").get<std::size_t>();
  if (j.contains("station_radius")) spec.station_radius = j.at("station_radius").get<double>();
  if (j.contains("path_radius")) spec.path_radius = j.at("path_radius").get<double>();
  if (j.contains("frame_count")) spec.frame_count = j.at("frame_count").get<std::int64_t>();
  if (j.contains("noise_model")) spec.noise = noise_from_json(j.at("noise_model"));
  if (j.contains("offset_model")) spec.offset = offset_from_json(j.at("offset_model"));
  if (j.contains("outlier_windows")) {
    for (const auto& w : j.at("outlier_windows")) {
      require_keys(w, {"start_frame", "end_frame", "station_index", "magnitude_m"},
                   "outlier_windows");
      OutlierWindow window;
      window.start_frame = w.at("start_frame").get<std::int64_t>();
      window.end_frame = w.at("end_frame").get<std::int64_t>();
      window.station_index = w.at("station_index").get<std::size_t>();
      window.magnitude_m = w.at("magnitude_m").get<double>();
      spec.outlier_windows.push_back(window);
    }
  }
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  spec.validate();
  return spec;
}

json filter_to_json(const FilterSpec& spec) {
  json j{{"window", spec.window},
         {"passes", spec.passes},
         {"variance_window", spec.variance_window},
         {"outlier_threshold_scale", spec.outlier_threshold_scale},
         {"weight_floor", spec.weight_floor}};
  if (spec.outlier_variance_threshold) {
    j["outlier_variance_threshold"] = *spec.outlier_variance_threshold;
  }
  return j;
}

FilterSpec filter_from_json(const json& j) {
  require_keys(j,
               {"window", "passes", "variance_window", "outlier_variance_threshold",
                "outlier_threshold_scale", "weight_floor"},
               "filter");
  FilterSpec spec;
  if (j.contains("window")) spec.window = j.at("window").get<int>();
  if (j.contains("passes")) spec.passes = j.at("passes").get<int>();
  if (j.contains("variance_window")) spec.variance_window = j.at("variance_window").get<int>();
  if (j.contains("outlier_variance_threshold")) {
    spec.outlier_variance_threshold = j.at("outlier_variance_threshold").get<double>();
  }
  if (j.contains("outlier_threshold_scale")) {
    spec.outlier_threshold_scale = j.at("outlier_threshold_scale").get<double>();
  }
  if (j.contains("weight_floor")) spec.weight_floor = j.at("weight_floor").get<double>();
  spec.validate();
  return spec;
}

ScenarioFile load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open scenario file: " + path.string());
  }
  json j = json::parse(in);
  ScenarioFile file;
  if (j.contains("filter")) {
    file.filter = filter_from_json(j.at("filter"));
    j.erase("filter");
  }
  file.scenario = scenario_from_json(j);
  return file;
}

void save_scenario_file(const std::filesystem::path& path, const ScenarioSpec& scenario,
                        const std::optional<FilterSpec>& filter) {
  json j = scenario_to_json(scenario);
  if (filter) {
    j["filter"] = filter_to_json(*filter);
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write scenario file: " + path.string());
  }
  out << j.dump(2) << '\n';
}

}  // namespace lpm
