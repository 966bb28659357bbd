#include <doctest.h>

#include <cmath>
#include <random>

#include "fluxlab/error.hpp"
#include "fluxlab/evaluate.hpp"
#include "support/tempdir.hpp"
#include "support/tiny.hpp"

using namespace fluxlab;
using fluxlab::testing::TempDir;
using fluxlab::testing::tiny_dataset;
using fluxlab::testing::tiny_model;

namespace {

std::vector<double> random_field(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> v(n);
    for (double& x : v) x = normal(rng);
    return v;
}

} // namespace

TEST_CASE("rel_metrics: identities under both aggregations") {
    const std::size_t times = 7, space = 24;
    const auto u = random_field(times * space, 1);
    std::vector<double> twice(u);
    for (double& x : twice) x *= 2.0;
    for (auto agg : {Aggregation::per_time, Aggregation::full_grid}) {
        CAPTURE(to_string(agg));
        const auto same = rel_metrics(u, u, times, agg);
        CHECK(same.rel_l2 == 0.0);
        CHECK(same.rel_linf == 0.0);
        const auto doubled = rel_metrics(twice, u, times, agg);
        CHECK(doubled.rel_l2 == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(doubled.rel_linf == doctest::Approx(1.0).epsilon(1e-14));
    }
    const auto per_time = rel_metrics(twice, u, times, Aggregation::per_time);
    CHECK(per_time.l2_curve.size() == times);
    CHECK(rel_metrics(twice, u, times, Aggregation::full_grid).l2_curve.empty());
}

TEST_CASE("rel_metrics: single-point perturbation gives |c| / max|u|") {
    const std::size_t space = 50;
    auto u = random_field(space, 2);
    double umax = 0.0;
    for (double x : u) umax = std::max(umax, std::abs(x));
    auto v = u;
    v[17] += 0.3;
    for (auto agg : {Aggregation::per_time, Aggregation::full_grid}) {
        CHECK(rel_metrics(v, u, 1, agg).rel_linf == doctest::Approx(0.3 / umax).epsilon(1e-12));
    }
}

TEST_CASE("rel_metrics: per-time and full-grid differ when slices have different scales") {
    // slice 0 has norm 1 and error 0.1; slice 1 has norm 100 and error 0.1
    const std::vector<double> target{1.0, 0.0, 100.0, 0.0};
    const std::vector<double> u{1.1, 0.0, 100.1, 0.0};
    const auto pt = rel_metrics(u, target, 2, Aggregation::per_time);
    const auto fg = rel_metrics(u, target, 2, Aggregation::full_grid);
    CHECK(pt.rel_l2 == doctest::Approx(0.5 * (0.1 + 0.001)));
    CHECK(fg.rel_l2 == doctest::Approx(std::sqrt(0.02) / std::sqrt(1.0 + 1e4)));
}

TEST_CASE("rel_metrics: zero-norm target and shape mismatch are errors") {
    const std::vector<double> zero(8, 0.0), one(8, 1.0);
    CHECK_THROWS_AS(rel_metrics(one, zero, 2, Aggregation::full_grid), DomainError);
    std::vector<double> half_zero(one);
    for (std::size_t i = 0; i < 4; ++i) half_zero[i] = 0.0;
    CHECK_THROWS_AS(rel_metrics(one, half_zero, 2, Aggregation::per_time), DomainError);
    CHECK_NOTHROW(rel_metrics(one, half_zero, 2, Aggregation::full_grid));
    CHECK_THROWS(rel_metrics(one, std::vector<double>(6, 1.0), 2));
}

TEST_CASE("summarize uses the population std and skips NaN") {
    const auto s = summarize({1.0, 3.0, std::nan("")});
    CHECK(s.mean == doctest::Approx(2.0));
    CHECK(s.std == doctest::Approx(1.0));
}

TEST_CASE("Protocol parsing") {
    CHECK(Protocol::parse("single_step").kind == Protocol::Kind::single_step);
    CHECK(Protocol::parse("rollout").steps == 20);
    CHECK(Protocol::parse("rollout:7").steps == 7);
    CHECK(Protocol::parse("rollout:7").name() == "rollout:7");
    CHECK(Protocol::parse("long_time").kind == Protocol::Kind::long_time);
    CHECK_THROWS_AS(Protocol::parse("rollout:0"), ConfigError);
    CHECK_THROWS_AS(Protocol::parse("rollout:x"), ConfigError);
    CHECK_THROWS_AS(Protocol::parse("forecast"), ConfigError);
}

TEST_CASE("evaluate: the oracle scores zero on every protocol") {
    TempDir tmp("eval-oracle");
    const Dataset data = tiny_dataset(tmp.path());
    const OraclePredictor oracle(data);
    for (const char* p : {"single_step", "rollout:5", "long_time"}) {
        CAPTURE(p);
        const auto r = evaluate(oracle, data, 4, Protocol::parse(p));
        CHECK(r.trajectories == 4);
        CHECK(r.rel_l2.mean == 0.0);
        CHECK(r.rel_linf.mean == 0.0);
        CHECK(r.failed == 0);
    }
}

TEST_CASE("evaluate: rollout(1) equals single-step on the first window") {
    TempDir tmp("eval-r1");
    const Dataset data = tiny_dataset(tmp.path());
    const HFluxNO model = tiny_model(data);
    const std::size_t k = 4;
    const ModelPredictor predictor(model);
    const auto r1 = evaluate(predictor, data, k, Protocol::parse("rollout:1"));
    REQUIRE(r1.per_trajectory_l2.size() == 4);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 2; ++i) {
            const ContextWindow w = data.window(c, i, 0, k);
            const Tensor ctx = Tensor::from_data({1, k, w.n_x, w.d}, w.context);
            const auto pred = model.predict(ctx).to_vector();
            const auto m = rel_metrics(pred, w.target, 1);
            CHECK(r1.per_trajectory_l2[c * 2 + i] == doctest::Approx(m.rel_l2).epsilon(1e-13));
            CHECK(r1.per_trajectory_linf[c * 2 + i] == doctest::Approx(m.rel_linf).epsilon(1e-13));
        }
    CHECK(r1.curve_time.size() == 1);
    CHECK(r1.curve_time[0] == doctest::Approx(static_cast<double>(k) * data.manifest().dt));
}

TEST_CASE("evaluate: untrained rollout conserves mass and matches the identity baseline") {
    TempDir tmp("eval-mass");
    const Dataset data = tiny_dataset(tmp.path(), "train", 5, 2, 2, 30);
    const HFluxNO model = tiny_model(data);
    const auto r = evaluate(ModelPredictor(model), data, 4, Protocol::parse("rollout:20"));
    CHECK(r.l2_curve.size() == 20);
    CHECK(r.max_mass_drift <= 1e-10);
    CHECK(r.sample_n_t == 30);
    CHECK(r.sample_truth.size() == 30 * 16);
    // context part of the sample repeats the truth
    for (std::size_t j = 0; j < 4 * 16; ++j) CHECK(r.sample_prediction[j] == r.sample_truth[j]);

    const auto id = evaluate(IdentityPredictor{}, data, 4, Protocol::parse("rollout:20"));
    CHECK(id.max_mass_drift <= 1e-12);
    // identity and untrained model both predict u^{k-1}
    CHECK(r.rel_l2.mean == doctest::Approx(id.rel_l2.mean).epsilon(1e-12));
}

TEST_CASE("evaluate: results do not depend on the worker count") {
    TempDir tmp("eval-jobs");
    const Dataset data = tiny_dataset(tmp.path(), "train", 6, 3, 2, 20);
    HFluxNO model = tiny_model(data);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 0.05);
    auto flat = model.params().flatten();
    for (double& v : flat) v += normal(rng);
    model.params().assign(flat);
    const ModelPredictor p(model);
    for (const char* proto : {"single_step", "rollout:6"}) {
        const auto a = evaluate(p, data, 4, Protocol::parse(proto), Aggregation::per_time, 1);
        const auto b = evaluate(p, data, 4, Protocol::parse(proto), Aggregation::per_time, 3);
        CHECK(a.per_trajectory_l2 == b.per_trajectory_l2);
        CHECK(a.rel_l2.mean == b.rel_l2.mean);
    }
    CHECK(model.params().flatten() == flat);
}

TEST_CASE("evaluate: dataset too short for the protocol is an error") {
    TempDir tmp("eval-short");
    const Dataset data = tiny_dataset(tmp.path(), "train", 5, 1, 1, 8);
    const auto oracle = OraclePredictor(data);
    CHECK_THROWS_AS(evaluate(oracle, data, 4, Protocol::parse("rollout:20")), ConfigError);
}
