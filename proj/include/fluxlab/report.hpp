#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "fluxlab/evaluate.hpp"

namespace fluxlab {

/// metrics.json body (NaN becomes null).
nlohmann::json metrics_json(const EvalReport& report);

/// sample.json body: one trajectory, truth and prediction over all saved times.
nlohmann::json sample_json(const EvalReport& report);

/// CSV "time,mean,std" of the rollout rel l2 curve; throws ConfigError when the
/// metrics carry no curve (single_step).
std::string error_curve_csv(const nlohmann::json& metrics);
/// CSV "t,x,value,prediction,abs_error" (plus "channel" when d > 1), one row
/// per saved time and cell.
std::string heatmap_csv(const nlohmann::json& sample);

/// Standalone SVG renderings of the same data.
std::string error_curve_svg(const nlohmann::json& metrics);
std::string heatmap_svg(const nlohmann::json& sample);

nlohmann::json read_json(const std::filesystem::path& file);
void write_text(const std::filesystem::path& file, const std::string& text);

} // namespace fluxlab
