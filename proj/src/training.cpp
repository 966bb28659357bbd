#include "fluxlab/training.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "fluxlab/error.hpp"
#include "fluxlab/ops.hpp"

namespace fluxlab {

void OptimizerConfig::validate() const {
    if (!(peak_lr > 0.0) || floor_lr < 0.0 || floor_lr > peak_lr) {
        throw ConfigError("optimizer: need 0 <= floor_lr <= peak_lr and peak_lr > 0");
    }
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) throw ConfigError("optimizer: warmup_fraction must be in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("optimizer: weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("optimizer: betas must be in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("optimizer: eps must be positive");
}

double lr_schedule(std::size_t step, std::size_t warmup_steps, std::size_t total_steps, double peak, double floor) {
    if (warmup_steps >= total_steps && total_steps > 0) throw ConfigError("lr_schedule: warmup must be shorter than the run");
    if (step > total_steps) throw ConfigError("lr_schedule: step beyond the end of the schedule");
    if (step < warmup_steps) return peak * static_cast<double>(step) / static_cast<double>(warmup_steps);
    if (total_steps == warmup_steps) return peak;
    const double progress =
        static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
    return floor + 0.5 * (peak - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(ParamSet& params, const OptimizerConfig& config)
    : params_(params), config_(config), m_(params.numel(), 0.0), v_(params.numel(), 0.0) {
    config_.validate();
}

void AdamW::restore(std::size_t steps, std::vector<double> m, std::vector<double> v) {
    if (m.size() != params_.numel() || v.size() != params_.numel()) {
        throw FormatError("optimizer moments hold " + std::to_string(m.size()) + "/" + std::to_string(v.size()) +
                          " values, model has " + std::to_string(params_.numel()) + " parameters");
    }
    t_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
}

void AdamW::step(double lr, double grad_scale) {
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    std::size_t offset = 0;
    for (auto& [name, p] : params_) {
        auto values = p.mutable_data();
        const bool has = p.has_grad();
        const auto g = has ? p.grad() : std::span<const double>{};
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double gi = has ? g[i] * grad_scale : 0.0;
            double& m = m_[offset + i];
            double& v = v_[offset + i];
            m = b1 * m + (1.0 - b1) * gi;
            v = b2 * v + (1.0 - b2) * gi * gi;
            values[i] -= lr * config_.weight_decay * values[i];
            values[i] -= lr * (m / c1) / (std::sqrt(v / c2) + config_.eps);
        }
        offset += values.size();
    }
}

Batch make_batch(const std::vector<ContextWindow>& windows) {
    if (windows.empty()) throw ConfigError("make_batch: empty batch");
    const auto& w0 = windows.front();
    const std::size_t b = windows.size();
    std::vector<double> ctx, tgt;
    ctx.reserve(b * w0.context.size());
    tgt.reserve(b * w0.target.size());
    Batch batch;
    for (const auto& w : windows) {
        if (w.k != w0.k || w.n_x != w0.n_x || w.d != w0.d) throw ShapeError("make_batch: windows differ in shape");
        ctx.insert(ctx.end(), w.context.begin(), w.context.end());
        tgt.insert(tgt.end(), w.target.begin(), w.target.end());
        batch.coeff_index.push_back(w.coeff_index);
        batch.ic_index.push_back(w.ic_index);
        batch.start.push_back(w.start);
    }
    batch.context = Tensor::from_data({b, w0.k, w0.n_x, w0.d}, std::move(ctx));
    batch.target = Tensor::from_data({b, w0.n_x, w0.d}, std::move(tgt));
    return batch;
}

namespace {

std::string describe_failure(const HFluxNO& model, const Batch& batch) {
    std::ostringstream os;
    os << "non-finite training loss; windows (coeff, ic, start):";
    for (std::size_t j = 0; j < batch.start.size(); ++j) {
        os << " (" << batch.coeff_index[j] << "," << batch.ic_index[j] << "," << batch.start[j] << ")";
    }
    os << "; parameter norms:";
    for (const auto& [name, p] : model.params()) {
        double s = 0.0;
        for (double x : p.data()) s += x * x;
        os << " " << name << "=" << std::sqrt(s);
    }
    return os.str();
}

} // namespace

StepResult train_step(HFluxNO& model, AdamW& optimizer, const Batch& batch, double lr) {
    Tape& tape = Tape::current();
    model.params().zero_grad();
    const Tensor loss = mse(model.predict(batch.context), batch.target);
    StepResult r;
    r.loss = loss.item();
    if (!std::isfinite(r.loss)) {
        tape.clear();
        throw DivergenceError(describe_failure(model, batch), optimizer.steps() + 1);
    }
    tape.backward(loss);
    double sq = 0.0;
    for (const auto& [name, p] : model.params()) {
        if (!p.has_grad()) continue;
        for (double g : p.grad()) sq += g * g;
    }
    r.grad_norm = std::sqrt(sq);
    if (!std::isfinite(r.grad_norm)) throw DivergenceError(describe_failure(model, batch), optimizer.steps() + 1);
    const double clip = optimizer.config().clip_norm;
    const double scale = clip > 0.0 && r.grad_norm > clip ? clip / r.grad_norm : 1.0;
    optimizer.step(lr, scale);
    return r;
}

double batch_loss(const HFluxNO& model, const Batch& batch) {
    NoGradGuard no_grad;
    return mse(model.predict(batch.context), batch.target).item();
}

std::size_t TrainConfig::warmup_steps() const {
    return static_cast<std::size_t>(optimizer.warmup_fraction * static_cast<double>(steps));
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
    optimizer.validate();
}

TrainState initial_train_state(const TrainConfig& config) {
    std::mt19937_64 rng(config.seed);
    std::ostringstream os;
    os << rng;
    TrainState s;
    s.rng_state = os.str();
    return s;
}

void train(HFluxNO& model, const Dataset& data, const TrainConfig& config, TrainState& state,
           const std::function<void(const LossRecord&)>& on_step,
           const std::function<void(const TrainState&)>& on_checkpoint) {
    config.validate();
    const auto& m = data.manifest();
    if (m.n_x != model.n_x() || m.n_q != model.channels()) {
        throw ConfigError("train: dataset grid " + std::to_string(m.n_x) + "x" + std::to_string(m.n_q) +
                          " does not match the model " + std::to_string(model.n_x()) + "x" +
                          std::to_string(model.channels()));
    }
    if (state.step > config.steps) throw ConfigError("train: state is past the requested step count");

    AdamW opt(model.params(), config.optimizer);
    if (state.m.empty()) {
        state.m.assign(model.params().numel(), 0.0);
        state.v.assign(model.params().numel(), 0.0);
    }
    opt.restore(state.optimizer_steps, state.m, state.v);
    std::mt19937_64 rng;
    {
        std::istringstream is(state.rng_state);
        is >> rng;
        if (!is) throw FormatError("train: unreadable rng state");
    }
    auto snapshot = [&] {
        std::ostringstream os;
        os << rng;
        state.rng_state = os.str();
        state.m = opt.first_moment();
        state.v = opt.second_moment();
        state.optimizer_steps = opt.steps();
    };

    const std::size_t warmup = config.warmup_steps();
    const std::size_t k = model.config().k;
    while (state.step < config.steps) {
        const std::size_t t = state.step + 1;
        const Batch batch = make_batch(sample_batch(data, config.batch_size, k, rng));
        const double lr =
            lr_schedule(t, warmup, config.steps, config.optimizer.peak_lr, config.optimizer.floor_lr);
        const StepResult r = train_step(model, opt, batch, lr);
        state.step = t;
        if (on_step) on_step({t, lr, r.loss});
        if (config.checkpoint_every > 0 && t % config.checkpoint_every == 0 && t < config.steps) {
            snapshot();
            if (on_checkpoint) on_checkpoint(state);
        }
    }
    snapshot();
    if (on_checkpoint) on_checkpoint(state);
}

} // namespace fluxlab
