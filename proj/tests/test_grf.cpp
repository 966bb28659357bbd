#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fluxlab/error.hpp"
#include "fluxlab/grf.hpp"

using namespace fluxlab;

namespace {

constexpr std::size_t kSamples = 10000;

/// Pooled empirical covariance at a lag, using stationarity over all grid points.
double empirical_cov(const std::vector<std::vector<double>>& fields, std::size_t lag) {
    const std::size_t n = fields.front().size();
    double acc = 0.0;
    for (const auto& f : fields)
        for (std::size_t i = 0; i < n; ++i) acc += f[i] * f[(i + lag) % n];
    return acc / static_cast<double>(fields.size() * n);
}

std::vector<std::vector<double>> draw(const CovarianceKernel& k, std::size_t n, std::size_t count, unsigned seed) {
    GrfSampler sampler(k, n);
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) out.push_back(sampler.sample(rng));
    return out;
}

} // namespace

TEST_CASE("kernels") {
    const auto ce = CovarianceKernel::cosine_exp();
    CHECK(ce(0.0) == 1.0);
    CHECK(ce(0.5) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
    CHECK(ce(0.3) == doctest::Approx(ce(0.7)).epsilon(1e-14));
    const auto g = CovarianceKernel::gaussian(0.5, 0.3);
    CHECK(g(0.0) == 0.5);
    CHECK(g(0.1) == doctest::Approx(g(0.9)).epsilon(1e-14));
    const double s = std::sqrt(3.141592653589793) / 2.0;
    CHECK(g(0.2) == doctest::Approx(0.5 * std::exp(-std::pow(s * 0.2 / 0.3, 2))).epsilon(1e-14));
    CHECK_THROWS_AS(CovarianceKernel::gaussian(0.5, 0.0), ConfigError);
}

TEST_CASE("sample_grf: covariance matches the kernel") {
    const std::size_t n = 100;
    const auto kernel = CovarianceKernel::cosine_exp();
    const auto fields = draw(kernel, n, kSamples, 7);
    for (std::size_t lag : {0u, 1u, 10u}) {
        const double expected = kernel(static_cast<double>(lag) / n);
        const double got = empirical_cov(fields, lag);
        INFO("lag " << lag << ": " << got << " vs " << expected);
        CHECK(std::abs(got - expected) <= 0.1 * expected);
    }
    // single-point variance, not pooled
    double var0 = 0.0;
    for (const auto& f : fields) var0 += f[0] * f[0];
    CHECK(std::abs(var0 / kSamples - 1.0) <= 0.1);
}

TEST_CASE("sample_grf: pointwise mean is zero") {
    const std::size_t n = 100;
    const auto fields = draw(CovarianceKernel::cosine_exp(), n, kSamples, 11);
    const double bound = 3.0 * 1.0 / std::sqrt(static_cast<double>(kSamples));
    for (std::size_t i = 0; i < n; ++i) {
        double mean = 0.0;
        for (const auto& f : fields) mean += f[i];
        mean /= kSamples;
        CHECK(std::abs(mean) <= bound);
    }
}

TEST_CASE("sample_grf: determinism and errors") {
    const auto k = CovarianceKernel::gaussian(0.5, 0.3);
    CHECK(sample_grf(k, 64, 42) == sample_grf(k, 64, 42));
    CHECK(sample_grf(k, 64, 42) != sample_grf(k, 64, 43));
    CHECK_THROWS_AS(sample_grf(k, 3, 1), ConfigError);
    for (double lambda : GrfSampler(k, 100).eigenvalues()) CHECK(lambda >= 0.0);
}

TEST_CASE("sample_lognormal") {
    const auto k = CovarianceKernel::gaussian(0.5, 0.3);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto h = sample_lognormal(k, 100, seed);
        CHECK(*std::min_element(h.begin(), h.end()) > 0.0);
    }
    const auto flat = sample_lognormal(CovarianceKernel::gaussian(1e-14, 0.3), 100, 3);
    for (double v : flat) CHECK(v == doctest::Approx(1.0).epsilon(1e-5));

    // median of exp(X) with X symmetric about zero is exp(0) = 1
    GrfSampler sampler(k, 100);
    std::mt19937_64 rng(5);
    std::vector<double> at0;
    for (std::size_t s = 0; s < kSamples; ++s) at0.push_back(std::exp(sampler.sample(rng)[17]));
    std::nth_element(at0.begin(), at0.begin() + kSamples / 2, at0.end());
    CHECK(std::abs(at0[kSamples / 2] - 1.0) <= 0.05);
}

TEST_CASE("sample_steps") {
    StepFunctionSpec one{1, 1, -1.0, 1.0};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto f = sample_steps(one, 100, seed);
        std::set<double> plateaus(f.begin(), f.end());
        CHECK(plateaus.size() >= 1);
        CHECK(plateaus.size() <= 2);
    }

    StepFunctionSpec cubic{1, 5, -1.0, 1.0};
    std::set<std::size_t> counts;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const auto f = sample_steps(cubic, 100, seed);
        for (double v : f) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
        std::size_t jumps = 0;
        for (std::size_t i = 0; i < f.size(); ++i) jumps += f[i] != f[(i + 1) % f.size()];
        CHECK(jumps <= 6);
        counts.insert(jumps);
    }
    CHECK(counts.size() > 3);

    StepFunctionSpec height{1, 5, 0.5, 4.5};
    double lowest = 1e9;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto f = sample_steps(height, 100, seed);
        lowest = std::min(lowest, *std::min_element(f.begin(), f.end()));
    }
    CHECK(lowest >= 0.5);

    CHECK(sample_steps(cubic, 100, 9) == sample_steps(cubic, 100, 9));
    CHECK_THROWS_AS(sample_steps(StepFunctionSpec{0, 2, 0.0, 1.0}, 10, 1), ConfigError);
    CHECK_THROWS_AS(sample_steps(StepFunctionSpec{1, 2, 1.0, 0.0}, 10, 1), ConfigError);
}
