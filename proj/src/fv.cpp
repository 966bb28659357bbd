#include "fluxlab/fv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "fluxlab/error.hpp"

namespace fluxlab {

FluxModel FluxModel::cubic(double c1, double c2, double c3) { return {FluxKind::cubic, {c1, c2, c3}}; }
FluxModel FluxModel::sine(double a, double b) { return {FluxKind::sine, {a, b}}; }
FluxModel FluxModel::shallow_water(double alpha, double gamma, double beta) {
    return {FluxKind::shallow_water, {alpha, gamma, beta}};
}
FluxModel FluxModel::viscous_burgers(double a, double nu) {
    if (!(nu >= 0.0)) throw ConfigError("viscous_burgers: nu must be nonnegative");
    return {FluxKind::viscous_burgers, {a, nu}};
}

std::size_t FluxModel::channels() const { return kind == FluxKind::shallow_water ? 2 : 1; }

std::string FluxModel::name() const {
    switch (kind) {
        case FluxKind::cubic: return "cubic";
        case FluxKind::sine: return "sine";
        case FluxKind::shallow_water: return "shallow_water";
        case FluxKind::viscous_burgers: return "viscous_burgers";
    }
    return "?";
}

SolverConfig SolverConfig::for_model(const FluxModel& model) {
    if (model.kind == FluxKind::viscous_burgers) return {0.4, 0.9};
    return {0.5, 0.9};
}

void SolverConfig::validate() const {
    if (!(cfl_desired > 0.0 && cfl_desired <= cfl_max && cfl_max < 1.0)) {
        throw ConfigError("solver config needs 0 < cfl_desired <= cfl_max < 1");
    }
}

Field::Field(std::size_t d, std::size_t n, std::vector<double> v) : channels(d), cells(n), values(std::move(v)) {
    if (values.size() != d * n) throw ShapeError("field values do not match [d, N]");
}

double Field::channel_sum(std::size_t c) const {
    double s = 0.0;
    for (std::size_t i = 0; i < cells; ++i) s += (*this)(c, i);
    return s;
}

Field Trajectory::snapshot(std::size_t t) const {
    Field f(channels, cells);
    for (std::size_t i = 0; i < cells; ++i)
        for (std::size_t c = 0; c < channels; ++c) f(c, i) = (*this)(t, i, c);
    return f;
}

void Trajectory::set_snapshot(std::size_t t, const Field& f) {
    for (std::size_t i = 0; i < cells; ++i)
        for (std::size_t c = 0; c < channels; ++c) (*this)(t, i, c) = f(c, i);
}

namespace {

// internal steps allowed between two saves before the run counts as diverged
constexpr std::size_t kMaxSubsteps = 20000;

double scalar_flux(const FluxModel& m, double u) {
    const auto& p = m.params;
    switch (m.kind) {
        case FluxKind::cubic: return ((p[2] * u + p[1]) * u + p[0]) * u;
        case FluxKind::sine: return p[0] * std::sin(p[1] * u);
        case FluxKind::viscous_burgers: return p[0] * u * u;
        default: return 0.0;
    }
}

double scalar_speed(const FluxModel& m, double u) {
    const auto& p = m.params;
    switch (m.kind) {
        case FluxKind::cubic: return std::abs((3.0 * p[2] * u + 2.0 * p[1]) * u + p[0]);
        case FluxKind::sine: return std::abs(p[0] * p[1] * std::cos(p[1] * u));
        case FluxKind::viscous_burgers: return std::abs(2.0 * p[0] * u);
        default: return 0.0;
    }
}

/// max |f'(u)| over the interval spanned by the two states.
double scalar_interval_speed(const FluxModel& m, double ul, double ur) {
    const double lo = std::min(ul, ur), hi = std::max(ul, ur);
    double s = std::max(scalar_speed(m, lo), scalar_speed(m, hi));
    const auto& p = m.params;
    if (m.kind == FluxKind::cubic && p[2] != 0.0) {
        const double vertex = -p[1] / (3.0 * p[2]);
        if (vertex > lo && vertex < hi) s = std::max(s, scalar_speed(m, vertex));
    } else if (m.kind == FluxKind::sine && p[1] != 0.0) {
        // |cos(b u)| reaches 1 at u = k pi / b
        const double step = std::numbers::pi / std::abs(p[1]);
        if (std::ceil(lo / step) * step <= hi) s = std::abs(p[0] * p[1]);
    }
    return s;
}

struct SwState {
    double h, m;
};

double sw_speed(const FluxModel& model, SwState q) {
    const double alpha = model.params[0], gamma = model.params[1], beta = model.params[2];
    const double h = std::max(q.h, kHeightFloor);
    const double u = q.m / h;
    return std::abs(gamma * u) + std::sqrt(std::max(0.0, gamma * (gamma - alpha) * u * u + alpha * beta * h));
}

/// Rusanov dissipation speed. Also bounds the transport speed alpha|u| of the height
/// equation, which the spectral radius can undercut when gamma < alpha; without it
/// the scheme loses positivity near dry states.
double sw_dissipation_speed(const FluxModel& model, SwState q) {
    const double alpha = model.params[0];
    const double u = q.m / std::max(q.h, kHeightFloor);
    return std::max(sw_speed(model, q), std::abs(alpha * u));
}

void sw_flux(const FluxModel& model, SwState q, double& fh, double& fm) {
    const double alpha = model.params[0], gamma = model.params[1], beta = model.params[2];
    const double h = std::max(q.h, kHeightFloor);
    fh = alpha * q.m;
    fm = gamma * q.m * q.m / h + 0.5 * beta * q.h * q.h;
}

double mc_slope(double back, double fwd) {
    if (back * fwd <= 0.0) return 0.0;
    const double mag = std::min({2.0 * std::abs(back), 2.0 * std::abs(fwd), 0.5 * std::abs(back + fwd)});
    return back > 0.0 ? mag : -mag;
}

/// Semi-discrete right-hand side L(u) = -(F_{i+1/2} - F_{i-1/2}) / dx (+ diffusion).
void rhs(const FluxModel& model, const Field& u, std::vector<double>& out) {
    const std::size_t n = u.cells, d = u.channels;
    const double dx = u.dx();
    std::vector<double> left(d * n), right(d * n), flux(d * n);
    // reconstructed states on either side of interface i+1/2
    for (std::size_t c = 0; c < d; ++c) {
        std::vector<double> slope(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double um = u(c, (i + n - 1) % n), u0 = u(c, i), up = u(c, (i + 1) % n);
            slope[i] = mc_slope(u0 - um, up - u0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ip = (i + 1) % n;
            left[c * n + i] = u(c, i) + 0.5 * slope[i];
            right[c * n + i] = u(c, ip) - 0.5 * slope[ip];
        }
    }
    if (model.kind == FluxKind::shallow_water) {
        for (std::size_t i = 0; i < n; ++i) {
            const SwState ql{left[i], left[n + i]}, qr{right[i], right[n + i]};
            double flh, flm, frh, frm;
            sw_flux(model, ql, flh, flm);
            sw_flux(model, qr, frh, frm);
            const double s = std::max(sw_dissipation_speed(model, ql), sw_dissipation_speed(model, qr));
            flux[i] = 0.5 * (flh + frh) - 0.5 * s * (qr.h - ql.h);
            flux[n + i] = 0.5 * (flm + frm) - 0.5 * s * (qr.m - ql.m);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double ul = left[i], ur = right[i];
            const double s = scalar_interval_speed(model, ul, ur);
            flux[i] = 0.5 * (scalar_flux(model, ul) + scalar_flux(model, ur)) - 0.5 * s * (ur - ul);
        }
    }
    out.assign(d * n, 0.0);
    const double nu = model.viscosity();
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t im = (i + n - 1) % n;
            double v = -(flux[c * n + i] - flux[c * n + im]) / dx;
            if (nu > 0.0) v += nu * (u(c, (i + 1) % n) - 2.0 * u(c, i) + u(c, im)) / (dx * dx);
            out[c * n + i] = v;
        }
}

double stable_dt(const FluxModel& model, const Field& u, const SolverConfig& config) {
    const double dx = u.dx();
    double speed = max_wave_speed(model, u);
    if (model.kind == FluxKind::shallow_water) {
        for (std::size_t i = 0; i < u.cells; ++i) speed = std::max(speed, sw_dissipation_speed(model, {u(0, i), u(1, i)}));
    }
    double dt = speed > 0.0 ? config.cfl_desired * dx / speed : std::numeric_limits<double>::infinity();
    if (model.viscosity() > 0.0) dt = std::min(dt, config.cfl_desired * dx * dx / (2.0 * model.viscosity()));
    return dt;
}

double min_height(const Field& f) {
    double h = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < f.cells; ++i) h = std::min(h, f(0, i));
    return h;
}

} // namespace

double max_wave_speed(const FluxModel& model, const Field& state) {
    if (state.cells == 0) throw ShapeError("max_wave_speed: empty field");
    if (state.channels != model.channels()) throw ShapeError("max_wave_speed: channel count mismatch");
    double s = 0.0;
    if (model.kind == FluxKind::shallow_water) {
        for (std::size_t i = 0; i < state.cells; ++i) s = std::max(s, sw_speed(model, {state(0, i), state(1, i)}));
    } else {
        for (std::size_t i = 0; i < state.cells; ++i) s = std::max(s, scalar_speed(model, state(0, i)));
    }
    return s;
}

Field step(const FluxModel& model, const Field& state, double dt, const SolverConfig& config) {
    config.validate();
    if (state.channels != model.channels()) {
        throw ShapeError("step: " + model.name() + " expects " + std::to_string(model.channels()) + " channels");
    }
    if (state.cells < 3) throw ConfigError("step: need at least 3 cells");
    if (!(dt > 0.0)) throw ConfigError("step: dt must be positive");
    const double dx = state.dx();
    const double cfl = dt * max_wave_speed(model, state) / dx;
    if (cfl > config.cfl_max) {
        std::ostringstream os;
        os << "step: CFL " << cfl << " exceeds maximum " << config.cfl_max;
        throw CflError(os.str());
    }
    if (model.viscosity() > 0.0 && dt * model.viscosity() / (dx * dx) > 0.5) {
        throw CflError("step: diffusive stability limit exceeded");
    }

    std::vector<double> k;
    rhs(model, state, k);
    Field stage = state;
    for (std::size_t j = 0; j < k.size(); ++j) stage.values[j] = state.values[j] + dt * k[j];
    rhs(model, stage, k);
    Field next = state;
    for (std::size_t j = 0; j < k.size(); ++j) {
        next.values[j] = 0.5 * state.values[j] + 0.5 * (stage.values[j] + dt * k[j]);
    }
    return next;
}

Trajectory solve(const FluxModel& model, const Field& ic, const SaveGrid& grid, const SolverConfig& config,
                 const StepObserver& observer) {
    config.validate();
    if (grid.steps == 0 || !(grid.dt > 0.0)) throw ConfigError("solve: empty save grid");
    if (ic.channels != model.channels()) throw ShapeError("solve: initial condition has wrong channel count");
    for (double v : ic.values) {
        if (!std::isfinite(v)) throw DomainError("solve: non-finite initial condition");
    }
    if (model.kind == FluxKind::shallow_water) {
        for (std::size_t i = 0; i < ic.cells; ++i) {
            if (!(ic(0, i) > 0.0)) throw DomainError("solve: shallow-water height must be positive");
        }
    }

    Trajectory traj;
    traj.steps = grid.steps;
    traj.cells = ic.cells;
    traj.channels = ic.channels;
    traj.values.assign(grid.steps * ic.cells * ic.channels, 0.0);
    traj.set_snapshot(0, ic);

    Field u = ic;
    double t = 0.0;
    std::size_t internal = 0;
    for (std::size_t n = 1; n < grid.steps; ++n) {
        const double target = static_cast<double>(n) * grid.dt;
        std::size_t substeps = 0;
        while (t < target) {
            double dt = stable_dt(model, u, config);
            if (++substeps > kMaxSubsteps) {
                std::ostringstream os;
                os << model.name() << " time step collapsed (dt = " << dt << ") before save step " << n;
                throw DivergenceError(os.str(), n);
            }
            bool last = false;
            if (t + dt >= target) {
                dt = target - t;
                last = true;
            }
            Field next = step(model, u, dt, config);
            // reject steps that push a height below the floor and retry with half the step
            while (model.kind == FluxKind::shallow_water && min_height(next) < kHeightFloor) {
                dt *= 0.5;
                last = false;
                if (++substeps > kMaxSubsteps) {
                    std::ostringstream os;
                    os << model.name() << " time step collapsed (dt = " << dt << ") keeping h >= " << kHeightFloor
                       << " before save step " << n;
                    throw DivergenceError(os.str(), n);
                }
                next = step(model, u, dt, config);
            }
            if (observer) observer(u, next, dt);
            u = std::move(next);
            ++internal;
            t = last ? target : t + dt;
            for (double v : u.values) {
                if (!(std::abs(v) <= kBlowUp)) {
                    throw DivergenceError(model.name() + " solution blew up before save step " + std::to_string(n) +
                                              " (internal step " + std::to_string(internal) + ")",
                                          n);
                }
            }
        }
        traj.set_snapshot(n, u);
    }
    return traj;
}

double total_variation(const Field& f, std::size_t channel) {
    double tv = 0.0;
    for (std::size_t i = 0; i < f.cells; ++i) tv += std::abs(f(channel, (i + 1) % f.cells) - f(channel, i));
    return tv;
}

} // namespace fluxlab
