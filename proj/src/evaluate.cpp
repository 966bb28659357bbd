#include "fluxlab/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fluxlab/error.hpp"
#include "fluxlab/ops.hpp"
#include "fluxlab/parallel.hpp"

namespace fluxlab {

std::string to_string(Aggregation a) { return a == Aggregation::per_time ? "per_time" : "full_grid"; }

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "per_time") return Aggregation::per_time;
    if (s == "full_grid") return Aggregation::full_grid;
    throw ConfigError("unknown aggregation '" + s + "' (expected per_time or full_grid)");
}

namespace {

struct Norms {
    double err2 = 0.0, ref2 = 0.0, err_inf = 0.0, ref_inf = 0.0;
    void add(double u, double t) {
        const double e = u - t;
        err2 += e * e;
        ref2 += t * t;
        err_inf = std::max(err_inf, std::abs(e));
        ref_inf = std::max(ref_inf, std::abs(t));
    }
    void check(const char* what) const {
        if (!(ref2 > 0.0)) throw DomainError(std::string("rel_metrics: target ") + what + " has zero norm");
    }
    double l2() const { return std::sqrt(err2 / ref2); }
    double linf() const { return err_inf / ref_inf; }
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

MetricReport rel_metrics(const std::vector<double>& u, const std::vector<double>& target, std::size_t times,
                         Aggregation aggregation) {
    if (u.size() != target.size()) {
        throw ShapeError("rel_metrics: prediction has " + std::to_string(u.size()) + " values, target " +
                         std::to_string(target.size()));
    }
    if (times == 0 || u.size() % times != 0 || u.empty()) {
        throw ShapeError("rel_metrics: " + std::to_string(u.size()) + " values do not split into " +
                         std::to_string(times) + " time slices");
    }
    MetricReport r;
    r.aggregation = aggregation;
    const std::size_t s = u.size() / times;
    if (aggregation == Aggregation::full_grid) {
        Norms n;
        for (std::size_t j = 0; j < u.size(); ++j) n.add(u[j], target[j]);
        n.check("array");
        r.rel_l2 = n.l2();
        r.rel_linf = n.linf();
        return r;
    }
    for (std::size_t t = 0; t < times; ++t) {
        Norms n;
        for (std::size_t j = t * s; j < (t + 1) * s; ++j) n.add(u[j], target[j]);
        n.check(("slice " + std::to_string(t)).c_str());
        r.l2_curve.push_back(n.l2());
        r.linf_curve.push_back(n.linf());
    }
    for (std::size_t t = 0; t < times; ++t) {
        r.rel_l2 += r.l2_curve[t];
        r.rel_linf += r.linf_curve[t];
    }
    r.rel_l2 /= static_cast<double>(times);
    r.rel_linf /= static_cast<double>(times);
    return r;
}

Tensor ModelPredictor::rollout(const Tensor& context, std::size_t n, const std::vector<WindowRef>&) const {
    return model_.rollout(context, n, mode_);
}

Tensor IdentityPredictor::rollout(const Tensor& context, std::size_t n, const std::vector<WindowRef>&) const {
    NoGradGuard no_grad;
    const std::size_t b = context.size(0), k = context.size(1), n_x = context.size(2), d = context.size(3);
    const Tensor last = reshape(select(context, 1, k - 1), {b, 1, n_x, d});
    return concat(std::vector<Tensor>(n, last), 1);
}

Tensor OraclePredictor::rollout(const Tensor& context, std::size_t n, const std::vector<WindowRef>& refs) const {
    const std::size_t b = context.size(0), k = context.size(1), n_x = context.size(2), d = context.size(3);
    if (refs.size() != b) throw ConfigError("oracle: every batch row needs a window reference");
    std::vector<double> out;
    out.reserve(b * n * n_x * d);
    for (const auto& r : refs) {
        const Trajectory t = data_.load_trajectory(r.coeff_index, r.ic_index);
        if (r.start + k + n > t.steps) throw ConfigError("oracle: rollout runs past the stored trajectory");
        const auto first = t.values.begin() + static_cast<std::ptrdiff_t>((r.start + k) * n_x * d);
        out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(n * n_x * d));
    }
    return Tensor::from_data({b, n, n_x, d}, std::move(out));
}

Protocol Protocol::parse(const std::string& s) {
    Protocol p;
    if (s == "single_step") {
        p.kind = Kind::single_step;
    } else if (s == "long_time") {
        p.kind = Kind::long_time;
    } else if (s == "rollout") {
        p.kind = Kind::rollout;
    } else if (s.rfind("rollout:", 0) == 0) {
        p.kind = Kind::rollout;
        const std::string n = s.substr(8);
        std::size_t used = 0;
        long v = -1;
        try {
            v = std::stol(n, &used);
        } catch (const std::exception&) {
        }
        if (used != n.size() || v <= 0) throw ConfigError("protocol '" + s + "': step count must be a positive integer");
        p.steps = static_cast<std::size_t>(v);
    } else {
        throw ConfigError("unknown protocol '" + s + "' (expected single_step, rollout[:N] or long_time)");
    }
    return p;
}

std::string Protocol::name() const {
    switch (kind) {
    case Kind::single_step:
        return "single_step";
    case Kind::rollout:
        return "rollout:" + std::to_string(steps);
    case Kind::long_time:
        return "long_time";
    }
    return "";
}

Summary summarize(const std::vector<double>& values) {
    Summary s;
    std::size_t n = 0;
    for (double v : values) {
        if (std::isnan(v)) continue;
        s.mean += v;
        ++n;
    }
    if (n == 0) return {kNaN, kNaN};
    s.mean /= static_cast<double>(n);
    for (double v : values) {
        if (!std::isnan(v)) s.std += (v - s.mean) * (v - s.mean);
    }
    s.std = std::sqrt(s.std / static_cast<double>(n));
    return s;
}

namespace {

struct TrajectoryResult {
    double l2 = kNaN, linf = kNaN;
    std::vector<double> l2_curve, linf_curve;
    double mass_drift = 0.0;
    bool failed = false;
    std::vector<double> prediction; // [N_t, N_x, d], only for the sample
};

Tensor context_batch(const Trajectory& t, const std::vector<std::size_t>& starts, std::size_t k) {
    const std::size_t slice = t.cells * t.channels;
    std::vector<double> v;
    v.reserve(starts.size() * k * slice);
    for (std::size_t s : starts) {
        const auto first = t.values.begin() + static_cast<std::ptrdiff_t>(s * slice);
        v.insert(v.end(), first, first + static_cast<std::ptrdiff_t>(k * slice));
    }
    return Tensor::from_data({starts.size(), k, t.cells, t.channels}, std::move(v));
}

constexpr std::size_t kEvalBatch = 32;

} // namespace

EvalReport evaluate(const Predictor& predictor, const Dataset& data, std::size_t k, const Protocol& protocol,
                    Aggregation aggregation, std::size_t jobs) {
    const auto& m = data.manifest();
    if (k == 0) throw ConfigError("evaluate: k must be at least 1");
    std::size_t n = 0;
    switch (protocol.kind) {
    case Protocol::Kind::single_step:
        n = 1;
        break;
    case Protocol::Kind::rollout:
        n = protocol.steps;
        break;
    case Protocol::Kind::long_time:
        n = m.n_t > k ? m.n_t - k : 0;
        break;
    }
    if (n == 0 || k + n > m.n_t) {
        throw ConfigError("evaluate: " + protocol.name() + " with k = " + std::to_string(k) + " needs more than the " +
                          std::to_string(m.n_t) + " stored steps");
    }
    const std::size_t slice = m.n_x * m.n_q;
    std::vector<TrajectoryResult> results(data.trajectories());

    parallel_for(results.size(), jobs, [&](std::size_t index) {
        NoGradGuard no_grad;
        const std::size_t c = index / m.n_init, i = index % m.n_init;
        const Trajectory t = data.load_trajectory(c, i);
        TrajectoryResult& res = results[index];
        const bool sample = index == 0;

        if (protocol.kind == Protocol::Kind::single_step) {
            const std::size_t windows = m.n_t - k;
            std::vector<double> pred, truth(t.values.begin() + static_cast<std::ptrdiff_t>(k * slice), t.values.end());
            pred.reserve(windows * slice);
            for (std::size_t s0 = 0; s0 < windows; s0 += kEvalBatch) {
                std::vector<std::size_t> starts;
                std::vector<WindowRef> refs;
                for (std::size_t s = s0; s < std::min(windows, s0 + kEvalBatch); ++s) {
                    starts.push_back(s);
                    refs.push_back({c, i, s});
                }
                const Tensor p = predictor.rollout(context_batch(t, starts, k), 1, refs);
                pred.insert(pred.end(), p.data().begin(), p.data().end());
            }
            const auto r = rel_metrics(pred, truth, windows, aggregation);
            res.l2 = r.rel_l2;
            res.linf = r.rel_linf;
            if (sample) {
                res.prediction.assign(t.values.begin(), t.values.begin() + static_cast<std::ptrdiff_t>(k * slice));
                res.prediction.insert(res.prediction.end(), pred.begin(), pred.end());
            }
            return;
        }

        std::vector<double> pred;
        try {
            const Tensor p = predictor.rollout(context_batch(t, {0}, k), n, {{c, i, 0}});
            pred.assign(p.data().begin(), p.data().end());
        } catch (const RolloutError&) {
            res.failed = true;
        }
        if (!res.failed) {
            for (double v : pred) {
                if (!std::isfinite(v)) {
                    res.failed = true;
                    break;
                }
            }
        }
        if (res.failed) {
            res.l2_curve.assign(n, kNaN);
            res.linf_curve.assign(n, kNaN);
            res.mass_drift = kNaN;
            if (sample) res.prediction.assign(m.n_t * slice, kNaN);
            return;
        }
        const std::vector<double> truth(t.values.begin() + static_cast<std::ptrdiff_t>(k * slice),
                                        t.values.begin() + static_cast<std::ptrdiff_t>((k + n) * slice));
        const auto curves = rel_metrics(pred, truth, n, Aggregation::per_time);
        res.l2_curve = curves.l2_curve;
        res.linf_curve = curves.linf_curve;
        const auto r = aggregation == Aggregation::per_time ? curves : rel_metrics(pred, truth, n, aggregation);
        res.l2 = r.rel_l2;
        res.linf = r.rel_linf;
        for (std::size_t ch = 0; ch < m.n_q; ++ch) {
            double m0 = 0.0;
            for (std::size_t x = 0; x < m.n_x; ++x) m0 += t(k - 1, x, ch);
            for (std::size_t s = 0; s < n; ++s) {
                double ms = 0.0;
                for (std::size_t x = 0; x < m.n_x; ++x) ms += pred[(s * m.n_x + x) * m.n_q + ch];
                res.mass_drift = std::max(res.mass_drift, std::abs(ms - m0));
            }
        }
        if (sample) {
            res.prediction.assign(t.values.begin(), t.values.begin() + static_cast<std::ptrdiff_t>(k * slice));
            res.prediction.insert(res.prediction.end(), pred.begin(), pred.end());
            res.prediction.resize(m.n_t * slice, kNaN);
        }
    });

    EvalReport report;
    report.protocol = protocol.name();
    report.aggregation = aggregation;
    report.k = k;
    report.trajectories = results.size();
    report.dt = m.dt;
    for (const auto& r : results) {
        report.per_trajectory_l2.push_back(r.l2);
        report.per_trajectory_linf.push_back(r.linf);
        if (r.failed) ++report.failed;
        if (!std::isnan(r.mass_drift)) report.max_mass_drift = std::max(report.max_mass_drift, r.mass_drift);
    }
    report.rel_l2 = summarize(report.per_trajectory_l2);
    report.rel_linf = summarize(report.per_trajectory_linf);
    if (protocol.kind != Protocol::Kind::single_step) {
        for (std::size_t s = 0; s < n; ++s) {
            std::vector<double> l2, linf;
            for (const auto& r : results) {
                l2.push_back(r.l2_curve[s]);
                linf.push_back(r.linf_curve[s]);
            }
            report.curve_time.push_back(static_cast<double>(k + s) * m.dt);
            report.l2_curve.push_back(summarize(l2));
            report.linf_curve.push_back(summarize(linf));
        }
    }
    if (!results.empty()) {
        const Trajectory t0 = data.load_trajectory(0, 0);
        report.sample_truth = t0.values;
        report.sample_prediction = results.front().prediction;
        report.sample_n_t = m.n_t;
        report.sample_n_x = m.n_x;
        report.sample_d = m.n_q;
    }
    return report;
}

} // namespace fluxlab
