#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fluxlab/tensor.hpp"

namespace fluxlab::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0,
                            bool requires_grad = true) {
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<double> data(numel(shape));
    for (double& v : data) v = normal(rng);
    return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::string worst; // "param[index]: tape vs fd"
};

/// Central finite-difference oracle for the tape gradients of a scalar loss.
///
/// Per element the error is |tape - fd| / max(|tape|, |fd|, floor); the floor
/// keeps gradients that vanish analytically from dividing rounding noise by ~0.
inline GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                                  double eps = 1e-6, double floor = 1e-6) {
    for (auto& p : params) p.zero_grad();
    Tensor loss = loss_fn();
    Tape::current().backward(loss);

    GradCheckResult result;
    NoGradGuard no_grad;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi];
        std::vector<double> tape(p.numel(), 0.0);
        if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), tape.begin());
        auto values = p.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = loss_fn().item();
            values[i] = saved - eps;
            const double down = loss_fn().item();
            values[i] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double err =
                std::abs(tape[i] - fd) / std::max({std::abs(tape[i]), std::abs(fd), floor});
            ++result.checked;
            if (err > result.max_rel_err) {
                result.max_rel_err = err;
                char buf[96];
                std::snprintf(buf, sizeof buf, "]: tape %.6e vs fd %.6e", tape[i], fd);
                result.worst = "param " + std::to_string(pi) + "[" + std::to_string(i) + buf;
            }
        }
    }
    return result;
}

} // namespace fluxlab::testing
