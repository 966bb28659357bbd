#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fluxlab/error.hpp"
#include "fluxlab/fv.hpp"
#include "fluxlab/grf.hpp"

using namespace fluxlab;

namespace {

/// Exact cell averages of sin(2 pi x).
Field sine_averages(std::size_t n) {
    Field f(1, n);
    const double dx = 1.0 / static_cast<double>(n);
    const double tau = 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = static_cast<double>(i) * dx;
        f(0, i) = (std::cos(tau * a) - std::cos(tau * (a + dx))) / (tau * dx);
    }
    return f;
}

double rel_l2(const Field& a, const Field& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < a.values.size(); ++j) {
        num += (a.values[j] - b.values[j]) * (a.values[j] - b.values[j]);
        den += b.values[j] * b.values[j];
    }
    return std::sqrt(num / den);
}

double one_period_error(std::size_t n) {
    const auto model = FluxModel::cubic(1.0, 0.0, 0.0);
    const Field ic = sine_averages(n);
    const auto traj = solve(model, ic, {2, 1.0}, SolverConfig::for_model(model));
    return rel_l2(traj.snapshot(1), ic);
}

Field shallow_water_ic(std::size_t n, std::uint64_t seed) {
    const auto k = CovarianceKernel::gaussian(0.5, 0.3);
    const auto h = sample_lognormal(k, n, seed);
    const auto m = sample_grf(k, n, seed + 1000003);
    Field f(2, n);
    for (std::size_t i = 0; i < n; ++i) {
        f(0, i) = h[i];
        f(1, i) = m[i];
    }
    return f;
}

} // namespace

TEST_CASE("max_wave_speed") {
    Field u(1, 4, {0.3, -2.0, 5.0, 0.0});
    CHECK(max_wave_speed(FluxModel::cubic(1.0, 0.0, 0.0), u) == 1.0);
    CHECK(max_wave_speed(FluxModel::viscous_burgers(0.5, 0.01), u) == 5.0);

    Field small(1, 3, {1e-3, -2e-3, 0.0});
    CHECK(max_wave_speed(FluxModel::sine(0.5, 2.0), small) <= 1.0);

    const double g = 9.81;
    Field rest(2, 3, {1.0, 1.0, 1.0, 0.0, 0.0, 0.0});
    CHECK(max_wave_speed(FluxModel::shallow_water(1.0, 1.0, g), rest) == doctest::Approx(std::sqrt(g)).epsilon(1e-15));
    // standard system with flow: |u| + sqrt(g h)
    Field moving(2, 1, {2.0, 3.0});
    CHECK(max_wave_speed(FluxModel::shallow_water(1.0, 1.0, g), moving) ==
          doctest::Approx(1.5 + std::sqrt(2.0 * g)).epsilon(1e-14));

    CHECK_THROWS(max_wave_speed(FluxModel::cubic(1, 0, 0), Field(1, 0)));
}

TEST_CASE("step: constant states are fixed points") {
    const SolverConfig cfg;
    for (const auto& model : {FluxModel::cubic(0.3, -0.7, 0.9), FluxModel::sine(0.8, -0.6),
                              FluxModel::viscous_burgers(1.2, 0.01)}) {
        Field u(1, 50);
        for (double& v : u.values) v = 0.37;
        const Field next = step(model, u, 1e-4, cfg);
        CHECK(next.values == u.values);
    }
    // lake at rest
    Field lake(2, 40);
    for (std::size_t i = 0; i < 40; ++i) lake(0, i) = 2.5;
    const auto sw = FluxModel::shallow_water(1.1, 0.8, 10.0);
    const auto traj = solve(sw, lake, {5, 0.005}, SolverConfig::for_model(sw));
    CHECK(traj.snapshot(4).values == lake.values);
}

TEST_CASE("step: discrete conservation") {
    const std::size_t n = 100;
    const SolverConfig cfg;
    for (const auto& model : {FluxModel::cubic(0.4, -0.9, 0.7), FluxModel::sine(-0.6, 0.9)}) {
        Field u(1, n, sample_grf(CovarianceKernel::cosine_exp(), n, 3));
        for (int s = 0; s < 200; ++s) {
            const double dt = 0.5 * u.dx() / std::max(max_wave_speed(model, u), 1e-12);
            const Field next = step(model, u, dt, cfg);
            CHECK(std::abs(next.channel_sum(0) - u.channel_sum(0)) <= 1e-12 * (1.0 + std::abs(u.channel_sum(0))));
            u = next;
        }
    }
    const auto sw = FluxModel::shallow_water(0.7, 1.3, 9.0);
    Field q = shallow_water_ic(n, 21);
    for (int s = 0; s < 200; ++s) {
        const double dt = 0.5 * q.dx() / max_wave_speed(sw, q);
        const Field next = step(sw, q, dt, cfg);
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(std::abs(next.channel_sum(c) - q.channel_sum(c)) <= 1e-12 * (1.0 + std::abs(q.channel_sum(c))));
        }
        q = next;
    }
}

TEST_CASE("step: CFL violation") {
    Field u = sine_averages(20);
    CHECK_THROWS_AS(step(FluxModel::cubic(1, 0, 0), u, 0.95 / 20.0, SolverConfig{}), CflError);
    CHECK_NOTHROW(step(FluxModel::cubic(1, 0, 0), u, 0.85 / 20.0, SolverConfig{}));
    CHECK_THROWS_AS(SolverConfig({0.95, 0.9}).validate(), ConfigError);
}

TEST_CASE("linear advection accuracy and order") {
    const double e100 = one_period_error(100);
    const double e200 = one_period_error(200);
    const double e400 = one_period_error(400);
    CHECK(e200 <= 5e-3);
    const double p1 = std::log2(e100 / e200), p2 = std::log2(e200 / e400);
    INFO("orders " << p1 << ", " << p2);
    CHECK(p1 >= 1.5);
    CHECK(p1 <= 2.2);
    CHECK(p2 >= 1.5);
    CHECK(p2 <= 2.2);
}

TEST_CASE("TVD on step data") {
    const auto model = FluxModel::cubic(-1.0, 0.0, 0.0);
    Field u(1, 120, sample_steps(StepFunctionSpec{1, 5, -1.0, 1.0}, 120, 4));
    for (int s = 0; s < 300; ++s) {
        const Field next = step(model, u, 0.5 * u.dx(), SolverConfig{});
        CHECK(total_variation(next) <= total_variation(u) + 1e-10);
        u = next;
    }
}

TEST_CASE("shallow-water positivity") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int completed = 0;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const auto sw = FluxModel::shallow_water(0.5 + unit(rng), 0.5 + unit(rng), 8.0 + 4.0 * unit(rng));
        double lowest = 1e9;
        // every internal step, including those of runs that end in vacuum
        auto watch = [&](const Field&, const Field& after, double) {
            for (std::size_t i = 0; i < after.cells; ++i) lowest = std::min(lowest, after(0, i));
        };
        try {
            solve(sw, shallow_water_ic(100, seed), {100, 0.005}, SolverConfig::for_model(sw), watch);
            ++completed;
        } catch (const DivergenceError&) {
            // vacuum formation, see below
        }
        CHECK(lowest >= kHeightFloor);
    }
    CHECK(completed >= 10);
}

TEST_CASE("shallow-water vacuum formation is reported as divergence") {
    // gamma < alpha drains h faster than momentum: the solution reaches vacuum with m != 0
    const auto sw = FluxModel::shallow_water(1.5, 0.5, 12.0);
    CHECK_THROWS_AS(solve(sw, shallow_water_ic(100, 2), {100, 0.005}, SolverConfig::for_model(sw)), DivergenceError);
}

TEST_CASE("solve") {
    const auto zero = FluxModel::cubic(0.0, 0.0, 0.0);
    Field ic(1, 64, sample_grf(CovarianceKernel::cosine_exp(), 64, 1));
    const auto traj = solve(zero, ic, {100, 0.005}, SolverConfig::for_model(zero));
    CHECK(traj.steps == 100);
    CHECK(traj.values.size() == 100 * 64);
    for (std::size_t t = 0; t < 100; ++t) CHECK(traj.snapshot(t).values == ic.values);

    Field huge(1, 8);
    for (double& v : huge.values) v = 2e6;
    try {
        solve(zero, huge, {3, 0.005}, SolverConfig{});
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.step_index() == 1);
    }

    Field dry(2, 8);
    CHECK_THROWS_AS(solve(FluxModel::shallow_water(1, 1, 10), dry, {3, 0.005}, SolverConfig{}), DomainError);
}

TEST_CASE("viscous Burgers against a fine-grid reference") {
    const std::size_t coarse = 100, fine = 800, ratio = fine / coarse;
    const auto fine_ic = sample_grf(CovarianceKernel::cosine_exp(), fine, 2);
    Field f8(1, fine, fine_ic), f1(1, coarse);
    for (std::size_t i = 0; i < coarse; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < ratio; ++j) s += fine_ic[ratio * i + j];
        f1(0, i) = s / ratio;
    }
    const auto model = FluxModel::viscous_burgers(1.0, 0.01);
    const SaveGrid grid{81, 0.005};
    const auto t1 = solve(model, f1, grid, SolverConfig::for_model(model));
    const auto t8 = solve(model, f8, grid, SolverConfig::for_model(model));
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < grid.steps; ++t)
        for (std::size_t i = 0; i < coarse; ++i) {
            double ref = 0.0;
            for (std::size_t j = 0; j < ratio; ++j) ref += t8(t, ratio * i + j, 0);
            ref /= ratio;
            num += (t1(t, i, 0) - ref) * (t1(t, i, 0) - ref);
            den += ref * ref;
        }
    CHECK(std::sqrt(num / den) <= 1e-2);
}
