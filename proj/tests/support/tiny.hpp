#pragma once

#include <filesystem>

#include "fluxlab/dataset.hpp"
#include "fluxlab/model.hpp"

namespace fluxlab::testing {

/// Small model for N_x = 16 grids.
inline ModelConfig tiny_model_config(std::size_t k = 4) {
    ModelConfig c;
    c.encoder.patch_size = 4;
    c.encoder.e = 8;
    c.encoder.layers = 1;
    c.encoder.heads = 2;
    c.fluxno.w = 8;
    c.fluxno.layers = 1;
    c.fluxno.modes = 4;
    c.k = k;
    return c;
}

inline Dataset tiny_dataset(const std::filesystem::path& dir, const std::string& split = "train",
                            std::uint64_t seed = 5, std::size_t n_coeffs = 2, std::size_t n_init = 2,
                            std::size_t n_t = 12) {
    const auto m = DatasetManifest::for_split(FluxKind::cubic, split, seed, n_coeffs, n_init, 16, n_t);
    generate_split(m, dir);
    return Dataset::load(dir);
}

inline HFluxNO tiny_model(const Dataset& data, std::size_t k = 4, std::uint64_t seed = 9) {
    const auto& m = data.manifest();
    return HFluxNO(tiny_model_config(k), m.n_x, m.n_q, m.dt, m.dx, seed);
}

} // namespace fluxlab::testing
