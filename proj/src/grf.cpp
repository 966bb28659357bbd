#include "fluxlab/grf.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <tuple>

#include "fluxlab/dft.hpp"
#include "fluxlab/error.hpp"

namespace fluxlab {

CovarianceKernel CovarianceKernel::cosine_exp() { return {KernelKind::cosine_exp, 1.0, 1.0, 1.0}; }

CovarianceKernel CovarianceKernel::gaussian(double sigma2, double length) {
    if (!(sigma2 >= 0.0) || !(length > 0.0)) {
        throw ConfigError("gaussian kernel needs sigma2 >= 0 and length > 0");
    }
    return {KernelKind::gaussian, sigma2, length, std::sqrt(std::numbers::pi) / 2.0};
}

double CovarianceKernel::operator()(double r) const {
    switch (kind) {
        case KernelKind::cosine_exp:
            return std::exp(-(1.0 - std::cos(2.0 * std::numbers::pi * r)));
        case KernelKind::gaussian: {
            double a = std::fmod(std::abs(r), 1.0);
            a = std::min(a, 1.0 - a);
            const double z = rescale * a / length;
            return sigma2 * std::exp(-z * z);
        }
    }
    return 0.0;
}

std::string CovarianceKernel::name() const {
    return kind == KernelKind::cosine_exp ? "cosine_exp" : "gaussian";
}

namespace {

using SpectrumKey = std::tuple<int, double, double, double, std::size_t>;

std::shared_ptr<const std::vector<double>> circulant_spectrum(const CovarianceKernel& kernel, std::size_t n) {
    static std::mutex mutex;
    static std::map<SpectrumKey, std::shared_ptr<const std::vector<double>>> cache;
    const SpectrumKey key{static_cast<int>(kernel.kind), kernel.sigma2, kernel.length, kernel.rescale, n};
    std::lock_guard lock(mutex);
    auto& slot = cache[key];
    if (slot) return slot;

    std::vector<std::complex<double>> row(n);
    for (std::size_t j = 0; j < n; ++j) row[j] = kernel(static_cast<double>(j) / static_cast<double>(n));
    const auto spectrum = dft(row, -1);
    auto lambda = std::make_shared<std::vector<double>>(n);
    double peak = 0.0, worst = 0.0;
    std::size_t clipped = 0;
    for (std::size_t m = 0; m < n; ++m) {
        const double v = spectrum[m].real();
        peak = std::max(peak, v);
        if (v < 0.0) {
            ++clipped;
            worst = std::min(worst, v);
        }
        (*lambda)[m] = std::max(v, 0.0);
    }
    // rounding-level negatives are expected for smooth kernels; only report real ones
    if (clipped > 0 && worst < -1e-12 * std::max(peak, 1.0)) {
        spdlog::warn("{} kernel on N={}: clipped {} negative circulant eigenvalues (most negative {:.3e})",
                     kernel.name(), n, clipped, worst);
    }
    slot = std::move(lambda);
    return slot;
}

} // namespace

GrfSampler::GrfSampler(const CovarianceKernel& kernel, std::size_t n) : n_(n) {
    if (n < 4) throw ConfigError("GRF grid needs N >= 4, got " + std::to_string(n));
    lambda_ = circulant_spectrum(kernel, n);
    amplitude_.resize(n);
    for (std::size_t m = 0; m < n; ++m) amplitude_[m] = std::sqrt((*lambda_)[m] / static_cast<double>(n));
}

std::vector<double> GrfSampler::sample(std::mt19937_64& rng) const {
    std::normal_distribution<double> normal;
    std::vector<std::complex<double>> noise(n_);
    for (std::size_t m = 0; m < n_; ++m) {
        const double re = normal(rng);
        const double im = normal(rng);
        noise[m] = amplitude_[m] * std::complex<double>(re, im);
    }
    const auto field = dft(noise, +1);
    std::vector<double> out(n_);
    for (std::size_t j = 0; j < n_; ++j) out[j] = field[j].real();
    return out;
}

std::vector<double> sample_grf(const CovarianceKernel& kernel, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return GrfSampler(kernel, n).sample(rng);
}

std::vector<double> sample_lognormal(const CovarianceKernel& kernel, std::size_t n, std::uint64_t seed) {
    auto field = sample_grf(kernel, n, seed);
    for (double& v : field) v = std::exp(v);
    return field;
}

std::vector<double> sample_steps(const StepFunctionSpec& spec, std::size_t n, std::mt19937_64& rng) {
    if (spec.min_steps < 1 || spec.max_steps < spec.min_steps) {
        throw ConfigError("step count range must satisfy 1 <= min <= max");
    }
    if (!(spec.max_height >= spec.min_height)) throw ConfigError("step height range is empty");
    if (static_cast<std::size_t>(spec.max_steps) > n) throw ConfigError("more steps than grid cells");

    std::uniform_int_distribution<int> count(spec.min_steps, spec.max_steps);
    const auto steps = static_cast<std::size_t>(count(rng));
    // distinct breakpoints on the grid, sorted
    std::vector<std::size_t> cells(n);
    for (std::size_t i = 0; i < n; ++i) cells[i] = i;
    std::vector<std::size_t> breaks;
    std::sample(cells.begin(), cells.end(), std::back_inserter(breaks), steps, rng);
    std::uniform_real_distribution<double> height(spec.min_height, spec.max_height);
    std::vector<double> heights(steps + 1);
    for (double& h : heights) h = spec.min_height == spec.max_height ? spec.min_height : height(rng);

    // segment s covers [breaks[s-1], breaks[s]); the last meets the first across x = 0
    std::vector<double> out(n);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (seg < steps && i >= breaks[seg]) ++seg;
        out[i] = heights[seg];
    }
    return out;
}

std::vector<double> sample_steps(const StepFunctionSpec& spec, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_steps(spec, n, rng);
}

} // namespace fluxlab
