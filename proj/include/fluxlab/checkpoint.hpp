#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fluxlab/config.hpp"
#include "fluxlab/model.hpp"
#include "fluxlab/training.hpp"

namespace fluxlab {

/// Grid the model was built for, taken from the training manifest.
struct GridInfo {
    std::string equation;
    std::size_t n_x = 0, d = 0;
    double dt = 0.0, dx = 0.0;
};

struct Checkpoint {
    RunConfig config;
    GridInfo grid;
    TrainState state;
    std::unique_ptr<HFluxNO> model;
};

/// params.f64 (flat little-endian float64 in ParamSet order), moments.f64
/// (first then second moments) and checkpoint.json (configs, grid, layout,
/// parameter shapes, step, rng state). checkpoint.json is written last.
void save_checkpoint(const std::filesystem::path& dir, const HFluxNO& model, const RunConfig& config,
                     const GridInfo& grid, const TrainState& state);

/// Rebuilds the model and restores its parameters; FormatError when files are
/// missing or disagree with the recorded layout.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

bool has_checkpoint(const std::filesystem::path& dir);

void write_f64(const std::filesystem::path& file, const std::vector<double>& values);
std::vector<double> read_f64(const std::filesystem::path& file);

} // namespace fluxlab
