#include <algorithm>

#include "common.hpp"
#include "fluxlab/ops.hpp"

namespace fluxlab {

using detail::extent;
using detail::grad_of;
using detail::normalize_axis;
using detail::out_grad;

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
    }
    Tensor result = make_result(std::move(shape), x.impl().data);
    Tape::current().record("reshape", {x}, result, [x, result]() {
        const double* g = out_grad(result);
        double* gx = grad_of(x);
        for (std::size_t i = 0, n = x.numel(); i < n; ++i) gx[i] += g[i];
    });
    return result;
}

namespace {

/// For each output flat index, the source flat index under an axis permutation.
std::vector<std::size_t> permutation_map(const Shape& in, const std::vector<std::size_t>& axes) {
    const std::size_t rank = in.size();
    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];
    Shape out(rank);
    std::vector<std::size_t> st(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        out[i] = in[axes[i]];
        st[i] = in_strides[axes[i]];
    }
    const std::size_t n = numel(in);
    std::vector<std::size_t> map(n);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t src = 0;
    for (std::size_t o = 0; o < n; ++o) {
        map[o] = src;
        for (std::size_t ax = rank; ax-- > 0;) {
            ++idx[ax];
            src += st[ax];
            if (idx[ax] < out[ax]) break;
            src -= st[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    return map;
}

} // namespace

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
    const Shape& in = x.shape();
    if (axes.size() != in.size()) {
        throw ShapeError("permute: " + std::to_string(axes.size()) + " axes for shape " +
                         to_string(in));
    }
    std::vector<bool> seen(in.size(), false);
    Shape out(in.size());
    for (std::size_t i = 0; i < axes.size(); ++i) {
        if (axes[i] >= in.size() || seen[axes[i]]) throw ShapeError("permute: invalid axis order");
        seen[axes[i]] = true;
        out[i] = in[axes[i]];
    }
    auto map = std::make_shared<std::vector<std::size_t>>(permutation_map(in, axes));
    const double* src = x.data().data();
    Buffer data(map->size());
    for (std::size_t o = 0; o < data.size(); ++o) data[o] = src[(*map)[o]];
    Tensor result = make_result(std::move(out), std::move(data));
    Tape::current().record("permute", {x}, result, [x, result, map]() {
        const double* g = out_grad(result);
        double* gx = grad_of(x);
        for (std::size_t o = 0; o < map->size(); ++o) gx[(*map)[o]] += g[o];
    });
    return result;
}

Tensor narrow(const Tensor& x, int axis, std::size_t start, std::size_t length) {
    const Shape& in = x.shape();
    const std::size_t ax = normalize_axis(axis, in.size(), "narrow");
    if (start + length > in[ax]) {
        throw ShapeError("narrow: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") exceeds axis of shape " + to_string(in));
    }
    const std::size_t outer = extent(in, 0, ax);
    const std::size_t inner = extent(in, ax + 1, in.size());
    const std::size_t n_ax = in[ax];
    Shape out = in;
    out[ax] = length;
    Buffer data(outer * length * inner);
    const double* src = x.data().data();
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(src + (o * n_ax + start) * inner, length * inner, data.data() + o * length * inner);
    }
    Tensor result = make_result(std::move(out), std::move(data));
    Tape::current().record("narrow", {x}, result, [=]() {
        const double* g = out_grad(result);
        double* gx = grad_of(x);
        for (std::size_t o = 0; o < outer; ++o) {
            double* dst = gx + (o * n_ax + start) * inner;
            const double* gs = g + o * length * inner;
            for (std::size_t i = 0; i < length * inner; ++i) dst[i] += gs[i];
        }
    });
    return result;
}

Tensor select(const Tensor& x, int axis, std::size_t index) {
    const std::size_t ax = normalize_axis(axis, x.dim(), "select");
    Tensor slab = narrow(x, static_cast<int>(ax), index, 1);
    Shape out = x.shape();
    out.erase(out.begin() + static_cast<long>(ax));
    return reshape(slab, std::move(out));
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = parts.front().shape();
    const std::size_t ax = normalize_axis(axis, first.size(), "concat");
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == ax) || s[i] == first[i];
        if (!ok) {
            throw ShapeError("concat: shape " + to_string(s) + " incompatible with " + to_string(first));
        }
        total += s[ax];
    }
    const std::size_t outer = extent(first, 0, ax);
    const std::size_t inner = extent(first, ax + 1, first.size());
    Shape out = first;
    out[ax] = total;
    Buffer data(outer * total * inner);
    std::size_t offset = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(offset);
        const std::size_t len = p.shape()[ax];
        const double* src = p.data().data();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(src + o * len * inner, len * inner,
                        data.data() + (o * total + offset) * inner);
        }
        offset += len;
    }
    Tensor result = make_result(std::move(out), std::move(data));
    Tape::current().record("concat", parts, result, [=]() {
        const double* g = out_grad(result);
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            double* gp = grad_of(parts[pi]);
            if (!gp) continue;
            const std::size_t len = parts[pi].shape()[ax];
            for (std::size_t o = 0; o < outer; ++o) {
                const double* gs = g + (o * total + offsets[pi]) * inner;
                double* dst = gp + o * len * inner;
                for (std::size_t i = 0; i < len * inner; ++i) dst[i] += gs[i];
            }
        }
    });
    return result;
}

namespace {

void roll_into(const double* src, double* dst, std::size_t outer, std::size_t n, std::size_t inner,
               std::size_t shift, bool accumulate) {
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = (i + shift) % n;
            const double* s = src + (o * n + i) * inner;
            double* d = dst + (o * n + j) * inner;
            if (accumulate) {
                for (std::size_t c = 0; c < inner; ++c) d[c] += s[c];
            } else {
                std::copy_n(s, inner, d);
            }
        }
    }
}

} // namespace

Tensor roll(const Tensor& x, long shift, int axis) {
    const Shape& in = x.shape();
    const std::size_t ax = normalize_axis(axis, in.size(), "roll");
    const std::size_t n = in[ax];
    const std::size_t outer = extent(in, 0, ax);
    const std::size_t inner = extent(in, ax + 1, in.size());
    const long ln = static_cast<long>(n);
    const std::size_t fwd = n == 0 ? 0 : static_cast<std::size_t>(((shift % ln) + ln) % ln);
    Buffer data(x.numel());
    roll_into(x.data().data(), data.data(), outer, n, inner, fwd, false);
    Tensor result = make_result(in, std::move(data));
    Tape::current().record("roll", {x}, result, [=]() {
        // Adjoint of a forward shift is the backward shift.
        roll_into(out_grad(result), grad_of(x), outer, n, inner, (n - fwd) % n, true);
    });
    return result;
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor result = make_result({}, {s});
    Tape::current().record("sum", {x}, result, [x, result]() {
        const double g = out_grad(result)[0];
        double* gx = grad_of(x);
        for (std::size_t i = 0, n = x.numel(); i < n; ++i) gx[i] += g;
    });
    return result;
}

Tensor sum(const Tensor& x, int axis, bool keepdim) {
    const Shape& in = x.shape();
    const std::size_t ax = normalize_axis(axis, in.size(), "sum");
    const std::size_t outer = extent(in, 0, ax);
    const std::size_t n = in[ax];
    const std::size_t inner = extent(in, ax + 1, in.size());
    Shape out = in;
    if (keepdim) {
        out[ax] = 1;
    } else {
        out.erase(out.begin() + static_cast<long>(ax));
    }
    Buffer data(outer * inner, 0.0);
    const double* src = x.data().data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < inner; ++c) data[o * inner + c] += src[(o * n + i) * inner + c];
    Tensor result = make_result(std::move(out), std::move(data));
    Tape::current().record("sum_axis", {x}, result, [=]() {
        const double* g = out_grad(result);
        double* gx = grad_of(x);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < inner; ++c) gx[(o * n + i) * inner + c] += g[o * inner + c];
    });
    return result;
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw ShapeError("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean(const Tensor& x, int axis, bool keepdim) {
    const double n = static_cast<double>(x.size(axis));
    return scale(sum(x, axis, keepdim), 1.0 / n);
}

} // namespace fluxlab
