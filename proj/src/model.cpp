#include "fluxlab/model.hpp"

#include <cmath>
#include <random>

#include "fluxlab/error.hpp"
#include "fluxlab/ops.hpp"

namespace fluxlab {

std::string to_string(RolloutMode mode) { return mode == RolloutMode::refresh ? "refresh" : "frozen"; }

RolloutMode rollout_mode_from_string(const std::string& s) {
    if (s == "refresh") return RolloutMode::refresh;
    if (s == "frozen") return RolloutMode::frozen;
    throw ConfigError("unknown rollout mode '" + s + "' (expected refresh or frozen)");
}

namespace {

std::uint64_t sub_seed(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

} // namespace

HFluxNO::HFluxNO(const ModelConfig& config, std::size_t n_x, std::size_t d, double dt, double dx, std::uint64_t seed)
    : config_(config),
      n_x_(n_x),
      d_(d),
      dt_(dt),
      dx_(dx),
      encoder_(config.encoder, n_x, d, sub_seed(seed, 1)),
      hyper_(config.encoder.e, param_layout(config.fluxno, d), sub_seed(seed, 2)) {
    if (config_.k == 0) throw ConfigError("model: context length k must be at least 1");
    if (!(dt > 0.0) || !(dx > 0.0)) throw ConfigError("model: dt and dx must be positive");
    config_.fluxno.validate_grid(n_x);
    params_.append("encoder.", encoder_.params());
    params_.append("hyper.", hyper_.params());
}

void HFluxNO::check_context(const Tensor& context) const {
    const Shape& s = context.shape();
    if (s.size() != 4 || s[1] == 0 || s[2] != n_x_ || s[3] != d_) {
        throw ShapeError("model: expected context [B, k, " + std::to_string(n_x_) + ", " + std::to_string(d_) +
                         "], got " + to_string(s));
    }
}

Tensor HFluxNO::theta(const Tensor& context) const {
    check_context(context);
    return hyper_.generate(encoder_.encode(context));
}

Tensor HFluxNO::step(const Tensor& u, const Tensor& theta) const {
    const Tensor state = permute(u, {0, 2, 1}); // [B, d, N_x]
    const Tensor fluxes = flux_eval(layout(), slice_theta(layout(), theta), build_stencil(state, config_.fluxno));
    return permute(conservative_update(state, fluxes, dt_, dx_), {0, 2, 1});
}

Tensor HFluxNO::predict(const Tensor& context) const {
    const Tensor th = theta(context);
    return step(select(context, 1, context.size(1) - 1), th);
}

Tensor HFluxNO::rollout(const Tensor& context, std::size_t n, RolloutMode mode) const {
    check_context(context);
    if (n == 0) throw ConfigError("model: rollout needs at least one step");
    NoGradGuard no_grad;
    const std::size_t k = context.size(1);
    Tensor window = context;
    Tensor th = theta(window);
    Tensor u = select(window, 1, k - 1);
    std::vector<Tensor> out;
    out.reserve(n);
    for (std::size_t t = 1; t <= n; ++t) {
        if (t > 1 && mode == RolloutMode::refresh) th = theta(window);
        u = step(u, th);
        for (double v : u.data()) {
            if (!std::isfinite(v)) throw RolloutError("model: non-finite prediction at rollout step " + std::to_string(t), t);
        }
        const Tensor next = reshape(u, {u.size(0), 1, n_x_, d_});
        out.push_back(next);
        if (mode == RolloutMode::refresh) window = k > 1 ? concat({narrow(window, 1, 1, k - 1), next}, 1) : next;
    }
    return concat(out, 1);
}

} // namespace fluxlab
