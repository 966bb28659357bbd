#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace fluxlab {

/// Twiddle factors cos(2 pi j / N), sin(2 pi j / N) for j in [0, N).
///
/// Values at multiples of a quarter turn are exact, so the DC and Nyquist
/// columns of real transforms carry no spurious imaginary parts.
class DftTable {
public:
    explicit DftTable(std::size_t n);

    std::size_t size() const noexcept { return n_; }
    double cos(std::size_t j) const noexcept { return cos_[j % n_]; }
    double sin(std::size_t j) const noexcept { return sin_[j % n_]; }

    /// Shared, lazily built table for length n (thread-safe).
    static std::shared_ptr<const DftTable> get(std::size_t n);

private:
    std::size_t n_;
    std::vector<double> cos_, sin_;
};

/// Direct O(N^2) complex DFT: X_m = sum_j x_j exp(sign * 2 pi i j m / N).
std::vector<std::complex<double>> dft(std::span<const std::complex<double>> x, int sign);

} // namespace fluxlab
