#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fluxlab/params.hpp"
#include "fluxlab/tensor.hpp"

namespace fluxlab {

struct EncoderConfig {
    std::size_t patch_size = 4;
    std::size_t e = 64;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t w_t = 4;
    bool coord_channel = false;

    void validate() const;
};

/// Temporally recurrent ViT: context [B, k, N_x, d] -> c [B, e].
///
/// Layer l: V <- TemporalBlock(V) along time per spatial token, then
/// V <- SpatialBlock(V) across tokens per time step. The encoder output is
/// the final-norm token average at the last time step.
class ContextEncoder {
public:
    ContextEncoder(const EncoderConfig& config, std::size_t n_x, std::size_t d, std::uint64_t seed);

    const EncoderConfig& config() const { return config_; }
    std::size_t tokens() const { return n_x_ / config_.patch_size; }
    std::size_t n_x() const { return n_x_; }
    std::size_t channels() const { return d_; }

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    /// [B, k, N_x, d] -> [B, e]. Also accepts an unbatched [k, N_x, d] -> [e].
    Tensor encode(const Tensor& context) const;

    /// Token states after the embedding (entry 0) and after every layer, all
    /// [B, k, P, e], computed at every time step.
    std::vector<Tensor> trace(const Tensor& context) const;

    Tensor patch_embed(const Tensor& context) const;
    /// Residual gated-recurrence block along axis 1 of [B, T, P, e].
    Tensor temporal_block(std::size_t layer, const Tensor& v) const;
    /// Pre-norm attention + MLP block over axis -2 of [.., P, e].
    Tensor spatial_block(std::size_t layer, const Tensor& v) const;

private:
    struct Layer {
        // temporal
        Tensor ln_t_gain, ln_t_bias, conv, w_a, b_a, w_x, b_x, lambda, w_o, b_o;
        // spatial
        Tensor ln_a_gain, ln_a_bias, wq, wk, wv, wo, bo, ln_m_gain, ln_m_bias, w1, b1, w2, b2;
    };

    Tensor run(const Tensor& context, std::vector<Tensor>* states) const;

    EncoderConfig config_;
    std::size_t n_x_, d_;
    ParamSet params_;
    Tensor w_patch_, b_patch_, pos_, ln_f_gain_, ln_f_bias_;
    std::vector<Layer> layers_;
};

} // namespace fluxlab
