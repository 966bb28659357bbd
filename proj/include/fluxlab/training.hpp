#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fluxlab/dataset.hpp"
#include "fluxlab/model.hpp"
#include "fluxlab/params.hpp"

namespace fluxlab {

struct OptimizerConfig {
    double peak_lr = 1e-3;
    double floor_lr = 1e-5;
    double warmup_fraction = 0.05;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0; // <= 0 disables clipping

    void validate() const;
};

/// Linear warm-up from 0 to peak over `warmup_steps`, then cosine decay to
/// `floor` at `total_steps`.
double lr_schedule(std::size_t step, std::size_t warmup_steps, std::size_t total_steps, double peak, double floor);

/// AdamW with decoupled weight decay. Moments are flat vectors in ParamSet
/// order.
class AdamW {
public:
    AdamW(ParamSet& params, const OptimizerConfig& config);

    const OptimizerConfig& config() const { return config_; }
    std::size_t steps() const { return t_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }
    void restore(std::size_t steps, std::vector<double> m, std::vector<double> v);

    /// Applies one update from the accumulated gradients, scaled by `grad_scale`.
    void step(double lr, double grad_scale = 1.0);

private:
    ParamSet& params_;
    OptimizerConfig config_;
    std::size_t t_ = 0;
    std::vector<double> m_, v_;
};

/// Batched model inputs built from dataset windows.
struct Batch {
    Tensor context; // [B, k, N_x, d]
    Tensor target;  // [B, N_x, d]
    std::vector<std::size_t> coeff_index, ic_index, start;
};

Batch make_batch(const std::vector<ContextWindow>& windows);

struct StepResult {
    double loss = 0.0;
    double grad_norm = 0.0; // before clipping
};

/// One optimizer step on the single-step MSE (averaged jointly over batch,
/// cells and channels). Throws DivergenceError, naming the batch windows and
/// parameter norms, when the loss is not finite; parameters are untouched then.
StepResult train_step(HFluxNO& model, AdamW& optimizer, const Batch& batch, double lr);

/// Single-step MSE without touching gradients.
double batch_loss(const HFluxNO& model, const Batch& batch);

struct TrainConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 32;
    std::size_t checkpoint_every = 500; // 0: only at the end
    std::uint64_t seed = 0;
    OptimizerConfig optimizer;

    std::size_t warmup_steps() const;
    void validate() const;
};

struct LossRecord {
    std::size_t step = 0; // 1-based update index
    double lr = 0.0;
    double loss = 0.0;
};

/// Everything needed to continue a run bit-exactly.
struct TrainState {
    std::size_t step = 0;
    std::string rng_state; // textual std::mt19937_64 state
    std::vector<double> m, v;
    std::size_t optimizer_steps = 0;
};

/// Runs updates `state.step + 1 .. config.steps`. `on_step` sees every loss
/// record; `on_checkpoint` is called every `checkpoint_every` updates and
/// after the last one.
void train(HFluxNO& model, const Dataset& data, const TrainConfig& config, TrainState& state,
           const std::function<void(const LossRecord&)>& on_step,
           const std::function<void(const TrainState&)>& on_checkpoint);

TrainState initial_train_state(const TrainConfig& config);

} // namespace fluxlab
