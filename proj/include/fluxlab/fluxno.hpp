#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fluxlab/tensor.hpp"

namespace fluxlab {

struct FluxNOConfig {
    std::size_t s = 2;      // stencil half-width
    std::size_t w = 16;     // lifted width
    std::size_t layers = 2; // spectral layers
    std::size_t modes = 8;  // retained Fourier modes
    bool coord_channel = false;

    std::size_t in_dim(std::size_t d) const { return 2 * s * d + (coord_channel ? 1 : 0); }
    void validate() const;
    /// Grid-dependent checks: N_x >= 2s and M <= N_x/2 + 1 with N_x even.
    void validate_grid(std::size_t n_x) const;
};

struct ParamSlot {
    std::string name;
    std::size_t offset = 0;
    Shape shape;
    std::size_t size() const { return numel(shape); }
};

/// Flat layout of the generated parameter vector: lift [w, in_dim], then one
/// [w, w, M, 2] block of complex spectral weights per layer, then proj [d, w].
struct ParamLayout {
    FluxNOConfig config;
    std::size_t d = 1;
    std::size_t q = 0;
    std::vector<ParamSlot> slots;

    const ParamSlot& lift() const { return slots.front(); }
    const ParamSlot& spectral(std::size_t layer) const { return slots.at(1 + layer); }
    const ParamSlot& proj() const { return slots.back(); }
};

ParamLayout param_layout(const FluxNOConfig& config, std::size_t d);

/// Theta sliced into operator weights. Every tensor keeps Theta's leading
/// batch axes, so gradients flow back into Theta.
struct FluxWeights {
    Tensor lift;               // [.., w, in_dim]
    std::vector<Tensor> modes; // [.., w, w, M, 2]
    Tensor proj;               // [.., d, w]
};

FluxWeights slice_theta(const ParamLayout& layout, const Tensor& theta);

/// Right stencil V^r: [.., d, N] -> [.., in_dim, N]. Column i describes the
/// interface i+1/2 through cells i-s+1 .. i+s, optionally followed by the
/// interface coordinate (i+1)/N.
Tensor build_stencil(const Tensor& u, const FluxNOConfig& config);

/// Left stencil V^l_i = V^r_{i-1}.
Tensor left_stencil(const Tensor& v_right);

/// Interface fluxes [.., d, N]; entry i is the flux through i+1/2.
Tensor flux_eval(const ParamLayout& layout, const FluxWeights& weights, const Tensor& stencil);

/// u_i - dt/dx (f_{i+1/2} - f_{i-1/2}) on [.., d, N] with periodic wrap.
Tensor conservative_update(const Tensor& u, const Tensor& fluxes, double dt, double dx);

} // namespace fluxlab
