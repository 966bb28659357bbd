#pragma once

#include <cstddef>
#include <cstdint>

#include "fluxlab/fluxno.hpp"
#include "fluxlab/params.hpp"

namespace fluxlab {

/// MLP c -> Theta with two gelu hidden layers of width 2e. The output weight
/// starts at zero, so Theta = b_out for every context until training moves it.
class Hypernetwork {
public:
    /// Throws ConfigError unless e <= q/4.
    Hypernetwork(std::size_t e, ParamLayout layout, std::uint64_t seed);

    const ParamLayout& layout() const { return layout_; }
    std::size_t context_dim() const { return e_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    /// [.., e] -> [.., q]
    Tensor generate(const Tensor& c) const;

private:
    std::size_t e_;
    ParamLayout layout_;
    ParamSet params_;
    Tensor w1_, b1_, w2_, b2_, w_out_, b_out_;
};

} // namespace fluxlab
