#include <doctest.h>

#include <cmath>

#include "fluxlab/error.hpp"
#include "fluxlab/ops.hpp"
#include "fluxlab/training.hpp"
#include "support/tempdir.hpp"
#include "support/tiny.hpp"

using namespace fluxlab;
using fluxlab::testing::TempDir;
using fluxlab::testing::tiny_dataset;
using fluxlab::testing::tiny_model;

TEST_CASE("lr_schedule: warm-up then cosine to the floor") {
    const double peak = 1e-3, floor = 1e-5;
    CHECK(lr_schedule(0, 100, 2000, peak, floor) == 0.0);
    CHECK(lr_schedule(50, 100, 2000, peak, floor) == doctest::Approx(0.5 * peak));
    CHECK(lr_schedule(100, 100, 2000, peak, floor) == doctest::Approx(peak).epsilon(1e-15));
    CHECK(lr_schedule(2000, 100, 2000, peak, floor) == doctest::Approx(floor).epsilon(1e-12));
    CHECK(lr_schedule(1050, 100, 2000, peak, floor) == doctest::Approx(0.5 * (peak + floor)));
    double prev = peak;
    for (std::size_t s = 101; s <= 2000; ++s) {
        const double lr = lr_schedule(s, 100, 2000, peak, floor);
        CHECK(lr <= prev);
        prev = lr;
    }
    // no warm-up: starts at the peak
    CHECK(lr_schedule(0, 0, 10, peak, floor) == doctest::Approx(peak));
    CHECK_THROWS_AS(lr_schedule(11, 0, 10, peak, floor), ConfigError);
    CHECK_THROWS_AS(lr_schedule(0, 10, 10, peak, floor), ConfigError);
    TrainConfig tc;
    tc.steps = 2000;
    CHECK(tc.warmup_steps() == 100);
}

TEST_CASE("AdamW: zero gradients and no weight decay leave parameters unchanged") {
    ParamSet ps;
    ps.add("a", Tensor::from_data({3}, {1.0, -2.0, 0.5}, true));
    ps.add("b", Tensor::from_data({2, 2}, {0.1, 0.2, 0.3, 0.4}, true));
    const auto before = ps.flatten();
    OptimizerConfig cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(ps, cfg);
    ps.zero_grad();
    for (int i = 0; i < 5; ++i) opt.step(1e-2);
    CHECK(ps.flatten() == before);
    CHECK(opt.steps() == 5);

    // decay alone shrinks every parameter by (1 - lr*wd)
    OptimizerConfig decay = cfg;
    decay.weight_decay = 0.1;
    AdamW opt2(ps, decay);
    opt2.step(0.5);
    const auto after = ps.flatten();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] == doctest::Approx(before[i] * 0.95));
}

TEST_CASE("AdamW: first update moves each parameter by lr against its gradient sign") {
    ParamSet ps;
    Tensor& p = ps.add("p", Tensor::from_data({3}, {0.0, 0.0, 0.0}, true));
    OptimizerConfig cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(ps, cfg);
    ps.zero_grad();
    Tape::current().backward(sum(mul(p, Tensor::from_data({3}, {2.0, -3.0, 1e-3}))));
    opt.step(1e-2);
    const auto v = p.to_vector();
    CHECK(v[0] == doctest::Approx(-1e-2).epsilon(1e-6));
    CHECK(v[1] == doctest::Approx(1e-2).epsilon(1e-6));
    CHECK(v[2] == doctest::Approx(-1e-2).epsilon(1e-4));
}

TEST_CASE("train_step: initial loss is the identity-prediction MSE") {
    TempDir tmp("train-id");
    const Dataset data = tiny_dataset(tmp.path());
    HFluxNO model = tiny_model(data);
    std::mt19937_64 rng(3);
    const Batch batch = make_batch(sample_batch(data, 6, 4, rng));

    const auto ctx = batch.context.to_vector();
    const auto tgt = batch.target.to_vector();
    const std::size_t b = 6, k = 4, cells = 16;
    double sq = 0.0;
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t x = 0; x < cells; ++x) {
            const double last = ctx[(i * k + k - 1) * cells + x];
            sq += (tgt[i * cells + x] - last) * (tgt[i * cells + x] - last);
        }
    const double identity_mse = sq / static_cast<double>(b * cells);
    CHECK(batch_loss(model, batch) == doctest::Approx(identity_mse).epsilon(1e-12));

    AdamW opt(model.params(), OptimizerConfig{});
    const StepResult r = train_step(model, opt, batch, 1e-4);
    CHECK(r.loss == doctest::Approx(identity_mse).epsilon(1e-12));
    CHECK(r.grad_norm > 0.0);
}

TEST_CASE("train_step: repeated batch at small lr strictly decreases the loss") {
    TempDir tmp("train-descent");
    const Dataset data = tiny_dataset(tmp.path());
    HFluxNO model = tiny_model(data);
    std::mt19937_64 rng(4);
    const Batch batch = make_batch(sample_batch(data, 8, 4, rng));
    OptimizerConfig cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(model.params(), cfg);
    double prev = batch_loss(model, batch);
    for (int i = 0; i < 5; ++i) {
        train_step(model, opt, batch, 1e-4);
        const double now = batch_loss(model, batch);
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("train_step: non-finite loss raises a diagnostic and keeps parameters") {
    TempDir tmp("train-nan");
    const Dataset data = tiny_dataset(tmp.path());
    HFluxNO model = tiny_model(data);
    std::mt19937_64 rng(5);
    Batch batch = make_batch(sample_batch(data, 2, 4, rng));
    batch.target.mutable_data()[3] = std::nan("");
    AdamW opt(model.params(), OptimizerConfig{});
    const auto before = model.params().flatten();
    try {
        train_step(model, opt, batch, 1e-3);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("coeff") != std::string::npos);
        CHECK(msg.find("norm") != std::string::npos);
        CHECK(e.step_index() == 1);
    }
    CHECK(model.params().flatten() == before);
    CHECK(opt.steps() == 0);
}

TEST_CASE("train: deterministic per seed and bit-exact across a resume") {
    TempDir tmp("train-resume");
    const Dataset data = tiny_dataset(tmp.path());
    TrainConfig cfg;
    cfg.steps = 8;
    cfg.batch_size = 4;
    cfg.checkpoint_every = 3;
    cfg.seed = 21;

    auto run = [&](std::vector<LossRecord>& losses, std::vector<TrainState>& checkpoints) {
        HFluxNO model = tiny_model(data);
        TrainState state = initial_train_state(cfg);
        train(model, data, cfg, state, [&](const LossRecord& r) { losses.push_back(r); },
              [&](const TrainState& s) { checkpoints.push_back(s); });
        return model.params().flatten();
    };
    std::vector<LossRecord> l1, l2;
    std::vector<TrainState> c1, c2;
    const auto p1 = run(l1, c1);
    const auto p2 = run(l2, c2);
    REQUIRE(l1.size() == 8);
    CHECK(p1 == p2);
    for (std::size_t i = 0; i < l1.size(); ++i) {
        CHECK(l1[i].step == i + 1);
        CHECK(l1[i].loss == l2[i].loss);
        CHECK(l1[i].lr == l2[i].lr);
    }
    REQUIRE(c1.size() == 3); // steps 3, 6, 8
    CHECK(c1[0].step == 3);
    CHECK(c1[2].step == 8);

    // Resume from the step-3 state with the parameters that state belongs to.
    HFluxNO resumed = tiny_model(data);
    {
        HFluxNO partial = tiny_model(data);
        TrainState s = initial_train_state(cfg);
        // same schedule as the full run, stopped at its first checkpoint
        std::vector<double> at3;
        try {
            train(partial, data, cfg, s, nullptr, [&](const TrainState& st) {
                if (st.step == 3) {
                    at3 = partial.params().flatten();
                    throw std::runtime_error("stop");
                }
            });
        } catch (const std::runtime_error&) {
        }
        REQUIRE(at3.size() == resumed.params().numel());
        resumed.params().assign(at3);
    }
    TrainState state = c1[0];
    std::vector<LossRecord> tail;
    train(resumed, data, cfg, state, [&](const LossRecord& r) { tail.push_back(r); }, nullptr);
    REQUIRE(tail.size() == 5);
    for (std::size_t i = 0; i < tail.size(); ++i) CHECK(tail[i].loss == l1[i + 3].loss);
    CHECK(resumed.params().flatten() == p1);
}

TEST_CASE("train: dataset grid must match the model") {
    TempDir tmp("train-grid");
    const Dataset data = tiny_dataset(tmp.path());
    HFluxNO wrong(fluxlab::testing::tiny_model_config(), 32, 1, 0.005, 1.0 / 32, 1);
    TrainConfig cfg;
    cfg.steps = 1;
    TrainState state = initial_train_state(cfg);
    CHECK_THROWS_AS(train(wrong, data, cfg, state, nullptr, nullptr), ConfigError);
}
