#pragma once

#include <cstddef>
#include <vector>

#include "fluxlab/tensor.hpp"

namespace fluxlab {

// Elementwise arithmetic with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
/// a^b elementwise; requires a > 0 wherever b is not an integer.
Tensor pow(const Tensor& a, const Tensor& b);
Tensor pow(const Tensor& a, double exponent);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor neg(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Exact (erf-based) GELU.
Tensor gelu(const Tensor& x);
/// Throws DomainError on negative input.
Tensor sqrt(const Tensor& x);
Tensor exp(const Tensor& x);
/// Throws DomainError on non-positive input.
Tensor log(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

/// [.., m, k] x [.., k, n] -> [.., m, n]; batch dims broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, int axis, bool keepdim = false);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, int axis, bool keepdim = false);
/// mean((a - b)^2) over every element.
Tensor mse(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor narrow(const Tensor& x, int axis, std::size_t start, std::size_t length);
/// narrow() of length one with the axis removed.
Tensor select(const Tensor& x, int axis, std::size_t index);
Tensor concat(const std::vector<Tensor>& parts, int axis);
/// Circular shift: out[(i + shift) mod n] = x[i] along `axis`.
Tensor roll(const Tensor& x, long shift, int axis);

/// Normalises the last axis to zero mean / unit (population) variance, then
/// applies gain and bias of shape [e].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// softmax(q k^T / sqrt(e_h)) v over the last two axes [.., P, e_h]; leading
/// axes (heads, batch) are independent.
Tensor softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// Real-signal circular convolution parameterised by retained Fourier modes.
///
/// z: [.., w_in, N] with N even. modes: [.., w_out, w_in, M, 2] holding the
/// (re, im) parts of the complex channel-mixing weights for modes 0..M-1;
/// modes' leading axes are either absent (shared) or equal to z's. Requires
/// M <= N/2 + 1. Output: [.., w_out, N].
Tensor circular_spectral_conv(const Tensor& z, const Tensor& modes);

/// Depthwise temporal convolution with w_t - 1 left zero padding, so output at
/// time t depends only on inputs at times <= t. x: [.., T, .., e] with time at
/// `time_axis` and channels on the last axis; kernel: [e, w_t], the last tap
/// multiplies the current step.
Tensor causal_depthwise_conv1d(const Tensor& x, const Tensor& kernel, int time_axis = -2);

/// Diagonal linear recurrence h_t = a_t * h_{t-1} + b_t with h_{-1} = 0, run
/// along `time_axis`. a and b share a shape.
Tensor linear_recurrence(const Tensor& a, const Tensor& b, int time_axis);

/// Periodic interface stencils. u: [.., d, N] -> [.., 2*half_width*d, N] where
/// column i stacks cells i-half_width+1 .. i+half_width (wrapped), channels
/// interleaved per cell.
Tensor periodic_stencil(const Tensor& u, std::size_t half_width);

} // namespace fluxlab
