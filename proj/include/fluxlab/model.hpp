#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "fluxlab/encoder.hpp"
#include "fluxlab/fluxno.hpp"
#include "fluxlab/hypernetwork.hpp"
#include "fluxlab/params.hpp"

namespace fluxlab {

struct ModelConfig {
    EncoderConfig encoder;
    FluxNOConfig fluxno;
    std::size_t k = 20; // context length
};

enum class RolloutMode { refresh, frozen };

std::string to_string(RolloutMode mode);
RolloutMode rollout_mode_from_string(const std::string& s);

/// Context encoder + hypernetwork + generated conservative flux operator.
/// States use the dataset layout [.., N_x, d].
class HFluxNO {
public:
    HFluxNO(const ModelConfig& config, std::size_t n_x, std::size_t d, double dt, double dx, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    std::size_t n_x() const { return n_x_; }
    std::size_t channels() const { return d_; }
    double dt() const { return dt_; }
    double dx() const { return dx_; }

    const ContextEncoder& encoder() const { return encoder_; }
    const Hypernetwork& hypernetwork() const { return hyper_; }
    const ParamLayout& layout() const { return hyper_.layout(); }
    /// Encoder parameters (prefix "encoder.") followed by hypernetwork ones
    /// (prefix "hyper.").
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    /// [B, k, N_x, d] -> Theta [B, q]
    Tensor theta(const Tensor& context) const;
    /// One conservative step of u [B, N_x, d] with Theta [B, q].
    Tensor step(const Tensor& u, const Tensor& theta) const;
    /// Next state after the last context snapshot: [B, k, N_x, d] -> [B, N_x, d].
    Tensor predict(const Tensor& context) const;

    /// Autoregressive prediction of n states after the context, without the
    /// tape. [B, k, N_x, d] -> [B, n, N_x, d]. Throws RolloutError with the
    /// 1-based step index when a prediction is not finite.
    Tensor rollout(const Tensor& context, std::size_t n, RolloutMode mode = RolloutMode::refresh) const;

private:
    void check_context(const Tensor& context) const;

    ModelConfig config_;
    std::size_t n_x_, d_;
    double dt_, dx_;
    ContextEncoder encoder_;
    Hypernetwork hyper_;
    ParamSet params_;
};

} // namespace fluxlab
