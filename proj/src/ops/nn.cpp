#include <cmath>

#include "common.hpp"
#include "fluxlab/ops.hpp"

namespace fluxlab {

using detail::extent;
using detail::grad_of;
using detail::normalize_axis;
using detail::out_grad;

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
    if (x.dim() < 1) throw ShapeError("layer_norm: scalar input");
    const std::size_t e = x.shape().back();
    if (gain.shape() != Shape{e} || bias.shape() != Shape{e}) {
        throw ShapeError("layer_norm: gain " + to_string(gain.shape()) + " / bias " +
                         to_string(bias.shape()) + " do not match last axis of " +
                         to_string(x.shape()));
    }
    const std::size_t rows = x.numel() / e;
    // normalised values and per-row reciprocal std, kept for the adjoint
    auto xhat = std::make_shared<Buffer>(x.numel());
    auto rstd = std::make_shared<Buffer>(rows);
    Buffer data(x.numel());
    const double* px = x.data().data();
    const double* pg = gain.data().data();
    const double* pb = bias.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = px + r * e;
        double mu = 0.0;
        for (std::size_t i = 0; i < e; ++i) mu += row[i];
        mu /= static_cast<double>(e);
        double var = 0.0;
        for (std::size_t i = 0; i < e; ++i) var += (row[i] - mu) * (row[i] - mu);
        var /= static_cast<double>(e);
        const double rs = 1.0 / std::sqrt(var + eps);
        (*rstd)[r] = rs;
        for (std::size_t i = 0; i < e; ++i) {
            const double h = (row[i] - mu) * rs;
            (*xhat)[r * e + i] = h;
            data[r * e + i] = h * pg[i] + pb[i];
        }
    }
    Tensor result = make_result(x.shape(), std::move(data));
    Tape::current().record("layer_norm", {x, gain, bias}, result, [=]() {
        const double* g = out_grad(result);
        double* gx = grad_of(x);
        double* gg = grad_of(gain);
        double* gb = grad_of(bias);
        const double* pgain = gain.data().data();
        Buffer gh(e);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g + r * e;
            const double* hr = xhat->data() + r * e;
            if (gg)
                for (std::size_t i = 0; i < e; ++i) gg[i] += gr[i] * hr[i];
            if (gb)
                for (std::size_t i = 0; i < e; ++i) gb[i] += gr[i];
            if (!gx) continue;
            double mean_gh = 0.0, mean_ghh = 0.0;
            for (std::size_t i = 0; i < e; ++i) {
                gh[i] = gr[i] * pgain[i];
                mean_gh += gh[i];
                mean_ghh += gh[i] * hr[i];
            }
            mean_gh /= static_cast<double>(e);
            mean_ghh /= static_cast<double>(e);
            for (std::size_t i = 0; i < e; ++i) {
                gx[r * e + i] += (*rstd)[r] * (gh[i] - mean_gh - hr[i] * mean_ghh);
            }
        }
    });
    return result;
}

namespace {

struct TimeLayout {
    std::size_t outer, steps, inner;
};

TimeLayout time_layout(const Shape& s, int time_axis, const char* op) {
    const std::size_t ax = normalize_axis(time_axis, s.size(), op);
    return {extent(s, 0, ax), s[ax], extent(s, ax + 1, s.size())};
}

} // namespace

Tensor causal_depthwise_conv1d(const Tensor& x, const Tensor& kernel, int time_axis) {
    const Shape& s = x.shape();
    if (s.size() < 2) throw ShapeError("causal_depthwise_conv1d: input rank < 2");
    const TimeLayout L = time_layout(s, time_axis, "causal_depthwise_conv1d");
    if (L.inner == 1 && normalize_axis(time_axis, s.size(), "causal_depthwise_conv1d") == s.size() - 1) {
        throw ShapeError("causal_depthwise_conv1d: time axis cannot be the channel axis");
    }
    const std::size_t e = s.back();
    if (kernel.dim() != 2 || kernel.shape()[0] != e || kernel.shape()[1] < 1) {
        throw ShapeError("causal_depthwise_conv1d: kernel " + to_string(kernel.shape()) +
                         " incompatible with input " + to_string(s));
    }
    const std::size_t width = kernel.shape()[1];
    const double* px = x.data().data();
    const double* pk = kernel.data().data();
    Buffer data(x.numel(), 0.0);
    auto at = [L](std::size_t o, std::size_t t, std::size_t i) { return (o * L.steps + t) * L.inner + i; };
    for (std::size_t o = 0; o < L.outer; ++o)
        for (std::size_t t = 0; t < L.steps; ++t)
            for (std::size_t i = 0; i < L.inner; ++i) {
                const std::size_t c = i % e;
                double acc = 0.0;
                for (std::size_t j = 0; j < width; ++j) {
                    const std::size_t lag = width - 1 - j;
                    if (lag > t) continue;
                    acc += pk[c * width + j] * px[at(o, t - lag, i)];
                }
                data[at(o, t, i)] = acc;
            }
    Tensor result = make_result(s, std::move(data));
    Tape::current().record("causal_depthwise_conv1d", {x, kernel}, result, [=]() {
        const double* g = out_grad(result);
        double* gx = grad_of(x);
        double* gk = grad_of(kernel);
        const double* xs = x.data().data();
        const double* ks = kernel.data().data();
        for (std::size_t o = 0; o < L.outer; ++o)
            for (std::size_t t = 0; t < L.steps; ++t)
                for (std::size_t i = 0; i < L.inner; ++i) {
                    const std::size_t c = i % e;
                    const double go = g[at(o, t, i)];
                    for (std::size_t j = 0; j < width; ++j) {
                        const std::size_t lag = width - 1 - j;
                        if (lag > t) continue;
                        const std::size_t src = at(o, t - lag, i);
                        if (gx) gx[src] += go * ks[c * width + j];
                        if (gk) gk[c * width + j] += go * xs[src];
                    }
                }
    });
    return result;
}

Tensor linear_recurrence(const Tensor& a, const Tensor& b, int time_axis) {
    if (a.shape() != b.shape()) {
        throw ShapeError("linear_recurrence: gate " + to_string(a.shape()) + " and input " +
                         to_string(b.shape()) + " differ");
    }
    const TimeLayout L = time_layout(a.shape(), time_axis, "linear_recurrence");
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    Buffer h(a.numel());
    auto at = [L](std::size_t o, std::size_t t, std::size_t i) { return (o * L.steps + t) * L.inner + i; };
    for (std::size_t o = 0; o < L.outer; ++o) {
        for (std::size_t i = 0; i < L.inner; ++i) h[at(o, 0, i)] = pb[at(o, 0, i)];
        for (std::size_t t = 1; t < L.steps; ++t)
            for (std::size_t i = 0; i < L.inner; ++i) {
                const std::size_t idx = at(o, t, i);
                h[idx] = pa[idx] * h[at(o, t - 1, i)] + pb[idx];
            }
    }
    Tensor result = make_result(a.shape(), std::move(h));
    Tape::current().record("linear_recurrence", {a, b}, result, [=]() {
        const double* g = out_grad(result);
        const double* hs = result.data().data();
        const double* as = a.data().data();
        double* ga = grad_of(a);
        double* gb = grad_of(b);
        Buffer carry(L.inner);
        for (std::size_t o = 0; o < L.outer; ++o) {
            std::fill(carry.begin(), carry.end(), 0.0);
            for (std::size_t t = L.steps; t-- > 0;) {
                for (std::size_t i = 0; i < L.inner; ++i) {
                    const std::size_t idx = at(o, t, i);
                    // total adjoint of h_t: direct + through h_{t+1} = a_{t+1} h_t + ...
                    const double gh = g[idx] + carry[i];
                    if (gb) gb[idx] += gh;
                    if (ga && t > 0) ga[idx] += gh * hs[at(o, t - 1, i)];
                    carry[i] = gh * as[idx];
                }
            }
        }
    });
    return result;
}

Tensor periodic_stencil(const Tensor& u, std::size_t half_width) {
    const Shape& s = u.shape();
    if (s.size() < 2) throw ShapeError("periodic_stencil: expected [.., d, N], got " + to_string(s));
    const std::size_t n = s.back();
    const std::size_t d = s[s.size() - 2];
    const std::size_t width = 2 * half_width;
    if (half_width == 0 || n < width) {
        throw ConfigError("periodic_stencil: N = " + std::to_string(n) + " too small for half width " +
                          std::to_string(half_width));
    }
    const std::size_t batch = u.numel() / (d * n);
    const std::size_t feat = width * d;
    Shape out(s.begin(), s.end() - 2);
    out.push_back(feat);
    out.push_back(n);
    // source cell for stencil slot j at interface i
    auto source = [=](std::size_t i, std::size_t j) { return (i + n + j + 1 - half_width) % n; };
    Buffer data(batch * feat * n);
    const double* pu = u.data().data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < width; ++j)
            for (std::size_t c = 0; c < d; ++c)
                for (std::size_t i = 0; i < n; ++i) {
                    data[(b * feat + j * d + c) * n + i] = pu[(b * d + c) * n + source(i, j)];
                }
    Tensor result = make_result(std::move(out), std::move(data));
    Tape::current().record("periodic_stencil", {u}, result, [=]() {
        const double* g = out_grad(result);
        double* gu = grad_of(u);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < width; ++j)
                for (std::size_t c = 0; c < d; ++c)
                    for (std::size_t i = 0; i < n; ++i) {
                        gu[(b * d + c) * n + source(i, j)] += g[(b * feat + j * d + c) * n + i];
                    }
    });
    return result;
}

} // namespace fluxlab
