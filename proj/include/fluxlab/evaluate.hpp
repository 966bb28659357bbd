#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "fluxlab/dataset.hpp"
#include "fluxlab/model.hpp"

namespace fluxlab {

enum class Aggregation {
    per_time,  // norms over space at each time, then the mean over time
    full_grid, // norms over the whole space-time array
};

std::string to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& s);

struct MetricReport {
    Aggregation aggregation = Aggregation::per_time;
    double rel_l2 = 0.0;
    double rel_linf = 0.0;
    std::vector<double> l2_curve, linf_curve; // per time; empty for full_grid
};

/// Relative l2 and linf errors of `u` against `target`, both [T, S] row-major
/// (S = every value of one time slice). Throws DomainError for a zero-norm
/// target slice (per_time) or target (full_grid).
MetricReport rel_metrics(const std::vector<double>& u, const std::vector<double>& target, std::size_t times,
                         Aggregation aggregation = Aggregation::per_time);

/// Where a batch row of contexts comes from.
struct WindowRef {
    std::size_t coeff_index = 0, ic_index = 0, start = 0;
};

/// Anything that continues a context window: [B, k, N_x, d] -> [B, n, N_x, d].
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual Tensor rollout(const Tensor& context, std::size_t n, const std::vector<WindowRef>& refs) const = 0;
};

class ModelPredictor : public Predictor {
public:
    explicit ModelPredictor(const HFluxNO& model, RolloutMode mode = RolloutMode::refresh)
        : model_(model), mode_(mode) {}
    Tensor rollout(const Tensor& context, std::size_t n, const std::vector<WindowRef>& refs) const override;

private:
    const HFluxNO& model_;
    RolloutMode mode_;
};

/// u^{n+1} := u^n.
class IdentityPredictor : public Predictor {
public:
    Tensor rollout(const Tensor& context, std::size_t n, const std::vector<WindowRef>& refs) const override;
};

/// Looks the answer up in the dataset.
class OraclePredictor : public Predictor {
public:
    explicit OraclePredictor(const Dataset& data) : data_(data) {}
    Tensor rollout(const Tensor& context, std::size_t n, const std::vector<WindowRef>& refs) const override;

private:
    const Dataset& data_;
};

struct Protocol {
    enum class Kind { single_step, rollout, long_time } kind = Kind::single_step;
    std::size_t steps = 20; // rollout only

    static Protocol parse(const std::string& s); // "single_step", "rollout", "rollout:N", "long_time"
    std::string name() const;
};

struct Summary {
    double mean = 0.0, std = 0.0;
};

Summary summarize(const std::vector<double>& values);

struct EvalReport {
    std::string protocol;
    Aggregation aggregation = Aggregation::per_time;
    std::size_t k = 0, trajectories = 0;
    std::size_t failed = 0; // rollouts that produced non-finite values
    Summary rel_l2, rel_linf;
    std::vector<double> per_trajectory_l2, per_trajectory_linf; // NaN for failed rollouts
    /// Rollout protocols: error per predicted step (times k .. k+n-1).
    std::vector<double> curve_time;
    std::vector<Summary> l2_curve, linf_curve;
    /// Largest |sum(prediction_t) - sum(u^{k-1})| over channels, steps and
    /// trajectories (rollout protocols).
    double max_mass_drift = 0.0;
    /// Trajectory (0, 0): truth and prediction over all N_t saved times; the
    /// first k predicted times repeat the context.
    std::vector<double> sample_truth, sample_prediction;
    std::size_t sample_n_t = 0, sample_n_x = 0, sample_d = 0;
    double dt = 0.0;
};

/// single_step uses every full window of every trajectory; rollout(n) and
/// long_time start from the first k snapshots. Trajectories are spread over
/// `jobs` threads; results do not depend on `jobs`.
EvalReport evaluate(const Predictor& predictor, const Dataset& data, std::size_t k, const Protocol& protocol,
                    Aggregation aggregation = Aggregation::per_time, std::size_t jobs = 1);

} // namespace fluxlab
