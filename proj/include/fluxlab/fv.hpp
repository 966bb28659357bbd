#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace fluxlab {

enum class FluxKind { cubic, sine, shallow_water, viscous_burgers };

/// Flux family plus its coefficients.
///   cubic:           f(u) = c3 u^3 + c2 u^2 + c1 u        params (c1, c2, c3)
///   sine:            f(u) = a sin(b u)                    params (a, b)
///   shallow_water:   F(h, m) = (alpha m, gamma m^2/h + beta h^2 / 2)   params (alpha, gamma, beta)
///   viscous_burgers: f(u) = a u^2, diffusion nu u_xx      params (a, nu)
struct FluxModel {
    FluxKind kind = FluxKind::cubic;
    std::vector<double> params;

    static FluxModel cubic(double c1, double c2, double c3);
    static FluxModel sine(double a, double b);
    static FluxModel shallow_water(double alpha, double gamma, double beta);
    static FluxModel viscous_burgers(double a, double nu);

    std::size_t channels() const;
    bool hyperbolic() const { return kind != FluxKind::viscous_burgers; }
    double viscosity() const { return kind == FluxKind::viscous_burgers ? params[1] : 0.0; }
    std::string name() const;
};

inline constexpr double kHeightFloor = 1e-8;
inline constexpr double kBlowUp = 1e6;

struct SolverConfig {
    double cfl_desired = 0.5;
    double cfl_max = 0.9;

    /// Defaults per family: 0.5 / 0.9 for the hyperbolic laws, 0.4 desired for Burgers.
    static SolverConfig for_model(const FluxModel& model);
    void validate() const;
};

/// Cell averages on the periodic unit interval, channel-major [d, N].
struct Field {
    std::size_t channels = 1;
    std::size_t cells = 0;
    std::vector<double> values;

    Field() = default;
    Field(std::size_t d, std::size_t n) : channels(d), cells(n), values(d * n, 0.0) {}
    Field(std::size_t d, std::size_t n, std::vector<double> v);

    double& operator()(std::size_t c, std::size_t i) { return values[c * cells + i]; }
    double operator()(std::size_t c, std::size_t i) const { return values[c * cells + i]; }
    double dx() const { return 1.0 / static_cast<double>(cells); }
    double channel_sum(std::size_t c) const;
};

/// Saved snapshots, [N_t, N_x, d].
struct Trajectory {
    std::size_t steps = 0, cells = 0, channels = 1;
    std::vector<double> values;

    double& operator()(std::size_t t, std::size_t i, std::size_t c) { return values[(t * cells + i) * channels + c]; }
    double operator()(std::size_t t, std::size_t i, std::size_t c) const {
        return values[(t * cells + i) * channels + c];
    }
    Field snapshot(std::size_t t) const;
    void set_snapshot(std::size_t t, const Field& f);
};

/// Output times t_n = n * dt for n = 0 .. steps-1.
struct SaveGrid {
    std::size_t steps = 100;
    double dt = 0.005;
};

/// max over cells of the largest characteristic speed.
double max_wave_speed(const FluxModel& model, const Field& state);

/// One SSP-RK2 step of the MUSCL / MC / Rusanov scheme (plus centered diffusion for Burgers).
Field step(const FluxModel& model, const Field& state, double dt, const SolverConfig& config);

/// Called after every internal step with the states before and after it.
using StepObserver = std::function<void(const Field& before, const Field& after, double dt)>;

/// Adaptive-dt integration hitting every save time exactly.
Trajectory solve(const FluxModel& model, const Field& ic, const SaveGrid& grid, const SolverConfig& config,
                 const StepObserver& observer = nullptr);

double total_variation(const Field& f, std::size_t channel = 0);

} // namespace fluxlab
