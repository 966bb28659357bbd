#include "fluxlab/hypernetwork.hpp"

#include <cmath>
#include <random>

#include "fluxlab/error.hpp"
#include "fluxlab/ops.hpp"

namespace fluxlab {

Hypernetwork::Hypernetwork(std::size_t e, ParamLayout layout, std::uint64_t seed) : e_(e), layout_(std::move(layout)) {
    if (e == 0) throw ConfigError("hypernetwork: context dim must be positive");
    if (4 * e > layout_.q) {
        throw ConfigError("hypernetwork: context dim " + std::to_string(e) + " is not a bottleneck for q = " +
                          std::to_string(layout_.q) + " (need e <= q/4)");
    }
    std::mt19937_64 rng(seed);
    const std::size_t h = 2 * e;
    w1_ = params_.add("w1", normal_param({e, h}, 1.0 / std::sqrt(static_cast<double>(e)), rng));
    b1_ = params_.add("b1", Tensor::zeros({h}));
    w2_ = params_.add("w2", normal_param({h, h}, 1.0 / std::sqrt(static_cast<double>(h)), rng));
    b2_ = params_.add("b2", Tensor::zeros({h}));
    w_out_ = params_.add("w_out", Tensor::zeros({h, layout_.q}));

    // base operator: random lift and spectral weights, zero projection
    std::vector<double> base(layout_.q, 0.0);
    const std::size_t w = layout_.config.w;
    auto fill = [&](const ParamSlot& slot, double std) {
        std::normal_distribution<double> normal(0.0, std);
        for (std::size_t j = 0; j < slot.size(); ++j) base[slot.offset + j] = normal(rng);
    };
    fill(layout_.lift(), 1.0 / std::sqrt(static_cast<double>(layout_.config.in_dim(layout_.d))));
    for (std::size_t l = 0; l < layout_.config.layers; ++l) {
        fill(layout_.spectral(l), 1.0 / std::sqrt(2.0 * static_cast<double>(w)));
    }
    b_out_ = params_.add("b_out", Tensor::from_data({layout_.q}, std::move(base)));
}

Tensor Hypernetwork::generate(const Tensor& c) const {
    if (c.dim() == 0 || c.size(-1) != e_) {
        throw ShapeError("hypernetwork: context " + to_string(c.shape()) + " does not end in " + std::to_string(e_));
    }
    if (c.dim() == 1) return reshape(generate(reshape(c, {1, e_})), {layout_.q});
    const Tensor h1 = gelu(add(matmul(c, w1_), b1_));
    const Tensor h2 = gelu(add(matmul(h1, w2_), b2_));
    return add(matmul(h2, w_out_), b_out_);
}

} // namespace fluxlab
