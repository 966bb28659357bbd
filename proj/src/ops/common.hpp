#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fluxlab/error.hpp"
#include "fluxlab/tensor.hpp"

namespace fluxlab::detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline std::size_t normalize_axis(int axis, std::size_t rank, const char* op) {
    const int r = static_cast<int>(rank);
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(rank));
    }
    return static_cast<std::size_t>(a);
}

/// Product of extents in [begin, end).
inline std::size_t extent(const Shape& s, std::size_t begin, std::size_t end) {
    std::size_t n = 1;
    for (std::size_t i = begin; i < end; ++i) n *= s[i];
    return n;
}

/// Gradient buffer of `t` if it takes part in differentiation, else nullptr.
inline double* grad_of(const Tensor& t) {
    if (!t.requires_grad()) return nullptr;
    return t.impl().grad_buffer().data();
}

inline const double* out_grad(const Tensor& t) { return t.impl().grad.data(); }

} // namespace fluxlab::detail
