#include <cmath>
#include <memory>
#include <numbers>

#include "common.hpp"
#include "fluxlab/ops.hpp"

namespace fluxlab {

using detail::grad_of;
using detail::out_grad;

namespace {

/// Index mapping from an output element to the two broadcast operands.
class Broadcast {
public:
    Broadcast(const Shape& a, const Shape& b, const char* op) {
        const std::size_t rank = std::max(a.size(), b.size());
        out_.assign(rank, 1);
        std::vector<std::size_t> ea(rank, 1), eb(rank, 1);
        for (std::size_t i = 0; i < a.size(); ++i) ea[rank - a.size() + i] = a[i];
        for (std::size_t i = 0; i < b.size(); ++i) eb[rank - b.size() + i] = b[i];
        for (std::size_t i = 0; i < rank; ++i) {
            if (ea[i] != eb[i] && ea[i] != 1 && eb[i] != 1) {
                throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(a) + " with " +
                                 to_string(b));
            }
            out_[i] = std::max(ea[i], eb[i]);
        }
        na_ = numel(a);
        nb_ = numel(b);
        n_ = numel(out_);
        if (a == b) {
            mode_ = Mode::Same;
        } else if (nb_ == 1) {
            mode_ = Mode::BScalar;
        } else if (na_ == 1) {
            mode_ = Mode::AScalar;
        } else if (is_suffix(b, out_) && na_ == n_) {
            mode_ = Mode::BSuffix;
        } else if (is_suffix(a, out_) && nb_ == n_) {
            mode_ = Mode::ASuffix;
        } else {
            mode_ = Mode::General;
            sa_ = strides(ea);
            sb_ = strides(eb);
        }
    }

    const Shape& shape() const { return out_; }
    std::size_t size() const { return n_; }

    template <class F>
    void for_each(F&& f) const {
        switch (mode_) {
            case Mode::Same:
                for (std::size_t i = 0; i < n_; ++i) f(i, i, i);
                return;
            case Mode::BScalar:
                for (std::size_t i = 0; i < n_; ++i) f(i, i, std::size_t{0});
                return;
            case Mode::AScalar:
                for (std::size_t i = 0; i < n_; ++i) f(i, std::size_t{0}, i);
                return;
            case Mode::BSuffix:
                for (std::size_t i = 0; i < n_; i += nb_)
                    for (std::size_t j = 0; j < nb_; ++j) f(i + j, i + j, j);
                return;
            case Mode::ASuffix:
                for (std::size_t i = 0; i < n_; i += na_)
                    for (std::size_t j = 0; j < na_; ++j) f(i + j, j, i + j);
                return;
            case Mode::General: {
                const std::size_t rank = out_.size();
                std::vector<std::size_t> idx(rank, 0);
                std::size_t ia = 0, ib = 0;
                for (std::size_t o = 0; o < n_; ++o) {
                    f(o, ia, ib);
                    for (std::size_t ax = rank; ax-- > 0;) {
                        ++idx[ax];
                        ia += sa_[ax];
                        ib += sb_[ax];
                        if (idx[ax] < out_[ax]) break;
                        ia -= sa_[ax] * idx[ax];
                        ib -= sb_[ax] * idx[ax];
                        idx[ax] = 0;
                    }
                }
                return;
            }
        }
    }

private:
    enum class Mode { Same, BScalar, AScalar, BSuffix, ASuffix, General };

    static bool is_suffix(const Shape& s, const Shape& out) {
        if (s.size() > out.size()) return false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] != out[out.size() - s.size() + i]) return false;
        }
        return true;
    }

    static std::vector<std::size_t> strides(const std::vector<std::size_t>& ext) {
        std::vector<std::size_t> st(ext.size(), 0);
        std::size_t acc = 1;
        for (std::size_t i = ext.size(); i-- > 0;) {
            st[i] = ext[i] == 1 ? 0 : acc;
            acc *= ext[i];
        }
        return st;
    }

    Mode mode_ = Mode::General;
    Shape out_;
    std::size_t na_ = 0, nb_ = 0, n_ = 0;
    std::vector<std::size_t> sa_, sb_;
};

/// f(x, y) -> value; da(x, y, out) and db(x, y, out) are the partials.
template <class F, class DA, class DB>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
    Broadcast bc(a.shape(), b.shape(), name);
    Buffer out(bc.size());
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    bc.for_each([&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = f(pa[ia], pb[ib]); });
    Tensor result = make_result(bc.shape(), std::move(out));
    Tape::current().record(name, {a, b}, result, [a, b, result, bc, da, db]() {
        const double* g = out_grad(result);
        const double* xa = a.data().data();
        const double* xb = b.data().data();
        const double* y = result.data().data();
        double* ga = grad_of(a);
        double* gb = grad_of(b);
        bc.for_each([&](std::size_t o, std::size_t ia, std::size_t ib) {
            if (ga) ga[ia] += g[o] * da(xa[ia], xb[ib], y[o]);
            if (gb) gb[ib] += g[o] * db(xa[ia], xb[ib], y[o]);
        });
    });
    return result;
}

/// f(x) -> value; df(x, out) is the derivative.
template <class F, class DF>
Tensor unary(const char* name, const Tensor& x, F f, DF df) {
    const auto in = x.data();
    Buffer out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    Tensor result = make_result(x.shape(), std::move(out));
    Tape::current().record(name, {x}, result, [x, result, df]() {
        const double* g = out_grad(result);
        const double* xi = x.data().data();
        const double* y = result.data().data();
        double* gx = grad_of(x);
        const std::size_t n = x.numel();
        for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * df(xi[i], y[i]);
    });
    return result;
}

/// unary() with a whole-array forward pass (Eigen's vectorized math).
template <class F, class DF>
Tensor unary_array(const char* name, const Tensor& x, F f, DF df) {
    using Arr = Eigen::Array<double, Eigen::Dynamic, 1>;
    const auto n = static_cast<Eigen::Index>(x.numel());
    Buffer out(x.numel());
    Eigen::Map<Arr>(out.data(), n) = f(Eigen::Map<const Arr>(x.data().data(), n));
    Tensor result = make_result(x.shape(), std::move(out));
    Tape::current().record(name, {x}, result, [x, result, df]() {
        const double* g = out_grad(result);
        const double* xi = x.data().data();
        const double* y = result.data().data();
        double* gx = grad_of(x);
        const std::size_t m = x.numel();
        for (std::size_t i = 0; i < m; ++i) gx[i] += g[i] * df(xi[i], y[i]);
    });
    return result;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double, double y, double) { return 1.0 / y; },
        [](double, double y, double out) { return -out / y; });
}

Tensor pow(const Tensor& a, const Tensor& b) {
    return binary(
        "pow", a, b, [](double x, double y) { return std::pow(x, y); },
        [](double x, double y, double) { return y * std::pow(x, y - 1.0); },
        [](double x, double, double out) { return x > 0.0 ? out * std::log(x) : 0.0; });
}

Tensor pow(const Tensor& a, double exponent) {
    return unary(
        "pow_scalar", a, [exponent](double x) { return std::pow(x, exponent); },
        [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
}

Tensor scale(const Tensor& x, double factor) {
    return unary(
        "scale", x, [factor](double v) { return factor * v; },
        [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
    return unary(
        "add_scalar", x, [value](double v) { return v + value; },
        [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor square(const Tensor& x) {
    return unary(
        "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sigmoid(const Tensor& x) {
    // exp(-v) overflows to inf for v << 0, which still gives 0
    return unary_array(
        "sigmoid", x, [](const auto& v) { return 1.0 / (1.0 + (-v).exp()); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor& x) {
    static constexpr double inv_sqrt2 = 0.70710678118654752440;
    static constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    using Arr = Eigen::Array<double, Eigen::Dynamic, 1>;
    const std::size_t n = x.numel();
    const auto in = x.data();
    auto cdf = std::make_shared<Buffer>(n);
    Buffer out(n);
    for (std::size_t i = 0; i < n; ++i) {
        (*cdf)[i] = 0.5 * (1.0 + std::erf(in[i] * inv_sqrt2));
        out[i] = in[i] * (*cdf)[i];
    }
    Tensor result = make_result(x.shape(), std::move(out));
    Tape::current().record("gelu", {x}, result, [x, result, cdf]() {
        const auto m = static_cast<Eigen::Index>(x.numel());
        Eigen::Map<const Arr> v(x.data().data(), m);
        Eigen::Map<const Arr> g(out_grad(result), m);
        Eigen::Map<Arr>(grad_of(x), m) +=
            g * (Eigen::Map<const Arr>(cdf->data(), m) + inv_sqrt_2pi * v * (-0.5 * v.square()).exp());
    });
    return result;
}

Tensor sqrt(const Tensor& x) {
    for (double v : x.data()) {
        if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
    }
    // The derivative is unbounded at 0; report 0 there (one-sided subgradient).
    return unary(
        "sqrt", x, [](double v) { return std::sqrt(v); },
        [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor exp(const Tensor& x) {
    return unary_array(
        "exp", x, [](const auto& v) { return v.exp(); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    for (double v : x.data()) {
        if (v <= 0.0) throw DomainError("log of non-positive value " + std::to_string(v));
    }
    return unary_array(
        "log", x, [](const auto& v) { return v.log(); }, [](double v, double) { return 1.0 / v; });
}

Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }

} // namespace fluxlab
