#include "fluxlab/fluxno.hpp"

#include "fluxlab/error.hpp"
#include "fluxlab/ops.hpp"

namespace fluxlab {

void FluxNOConfig::validate() const {
    if (s == 0 || w == 0 || modes == 0) throw ConfigError("fluxno: s, w and modes must be positive");
}

void FluxNOConfig::validate_grid(std::size_t n_x) const {
    if (n_x < 2 * s) {
        throw ConfigError("fluxno: N_x = " + std::to_string(n_x) + " is smaller than the stencil width " +
                          std::to_string(2 * s));
    }
    if (n_x % 2 != 0) throw ConfigError("fluxno: N_x must be even, got " + std::to_string(n_x));
    if (modes > n_x / 2 + 1) {
        throw ConfigError("fluxno: " + std::to_string(modes) + " modes exceed N_x/2 + 1 = " +
                          std::to_string(n_x / 2 + 1));
    }
}

ParamLayout param_layout(const FluxNOConfig& config, std::size_t d) {
    config.validate();
    if (d == 0) throw ConfigError("fluxno: channel count must be positive");
    ParamLayout layout;
    layout.config = config;
    layout.d = d;
    auto push = [&](std::string name, Shape shape) {
        ParamSlot slot{std::move(name), layout.q, std::move(shape)};
        layout.q += slot.size();
        layout.slots.push_back(std::move(slot));
    };
    push("lift", {config.w, config.in_dim(d)});
    for (std::size_t l = 0; l < config.layers; ++l) {
        push("spectral" + std::to_string(l), {config.w, config.w, config.modes, 2});
    }
    push("proj", {d, config.w});
    return layout;
}

FluxWeights slice_theta(const ParamLayout& layout, const Tensor& theta) {
    if (theta.dim() == 0 || theta.size(-1) != layout.q) {
        throw ShapeError("fluxno: Theta " + to_string(theta.shape()) + " does not match layout size " +
                         std::to_string(layout.q));
    }
    const Shape lead(theta.shape().begin(), theta.shape().end() - 1);
    auto take = [&](const ParamSlot& slot) {
        Shape shape = lead;
        shape.insert(shape.end(), slot.shape.begin(), slot.shape.end());
        return reshape(narrow(theta, -1, slot.offset, slot.size()), shape);
    };
    FluxWeights w;
    w.lift = take(layout.lift());
    for (std::size_t l = 0; l < layout.config.layers; ++l) w.modes.push_back(take(layout.spectral(l)));
    w.proj = take(layout.proj());
    return w;
}

Tensor build_stencil(const Tensor& u, const FluxNOConfig& config) {
    if (u.dim() < 2) throw ShapeError("fluxno: stencil input must be [.., d, N], got " + to_string(u.shape()));
    const std::size_t n = u.size(-1);
    if (n < 2 * config.s) {
        throw ConfigError("fluxno: N_x = " + std::to_string(n) + " is smaller than the stencil width " +
                          std::to_string(2 * config.s));
    }
    Tensor v = periodic_stencil(u, config.s);
    if (!config.coord_channel) return v;
    Shape shape = v.shape();
    shape[shape.size() - 2] = 1;
    std::vector<double> coord(numel(shape));
    for (std::size_t j = 0; j < coord.size(); ++j) {
        coord[j] = static_cast<double>(j % n + 1) / static_cast<double>(n);
    }
    return concat({v, Tensor::from_data(shape, std::move(coord))}, -2);
}

Tensor left_stencil(const Tensor& v_right) { return roll(v_right, 1, -1); }

Tensor flux_eval(const ParamLayout& layout, const FluxWeights& weights, const Tensor& stencil) {
    const std::size_t in = layout.config.in_dim(layout.d);
    if (stencil.dim() < 2 || stencil.size(-2) != in) {
        throw ShapeError("fluxno: stencil " + to_string(stencil.shape()) + " does not have " + std::to_string(in) +
                         " features");
    }
    if (weights.modes.size() != layout.config.layers) throw ShapeError("fluxno: wrong number of spectral layers");
    Tensor z = matmul(weights.lift, stencil);
    for (const Tensor& k : weights.modes) z = add(z, gelu(circular_spectral_conv(z, k)));
    return matmul(weights.proj, z);
}

Tensor conservative_update(const Tensor& u, const Tensor& fluxes, double dt, double dx) {
    if (!(dt > 0.0) || !(dx > 0.0)) throw ConfigError("fluxno: dt and dx must be positive");
    if (u.shape() != fluxes.shape()) {
        throw ShapeError("fluxno: state " + to_string(u.shape()) + " and fluxes " + to_string(fluxes.shape()) +
                         " differ");
    }
    return sub(u, scale(sub(fluxes, roll(fluxes, 1, -1)), dt / dx));
}

} // namespace fluxlab
