#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "fluxlab/fv.hpp"
#include "fluxlab/model.hpp"
#include "fluxlab/training.hpp"

namespace fluxlab {

struct DataConfig {
    FluxKind equation = FluxKind::cubic;
    std::size_t n_coeffs = 20;
    std::size_t n_init = 10;
    std::size_t holdout_n_coeffs = 5; // every split other than train
    std::size_t holdout_n_init = 10;
    std::size_t n_x = 100;
    std::size_t n_t = 100;
};

struct EvalConfig {
    RolloutMode rollout_mode = RolloutMode::refresh;
    std::string aggregation = "per_time";
};

/// Everything a command needs. Serialized as TOML for humans and embedded as
/// JSON in checkpoints.
struct RunConfig {
    std::uint64_t seed = 0;
    DataConfig data;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;

    void validate() const;
};

/// Parses TOML text; unknown tables or keys and wrongly typed values throw
/// ConfigError. Missing keys keep their defaults.
RunConfig parse_config(const std::string& toml_text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& file);

/// Every field, defaults included.
std::string to_toml(const RunConfig& config);
nlohmann::json to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);

/// FLUXLAB_SEED when set and well formed; ConfigError when set but malformed.
std::optional<std::uint64_t> seed_from_env();

} // namespace fluxlab
