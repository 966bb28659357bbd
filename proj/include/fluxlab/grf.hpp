#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace fluxlab {

enum class KernelKind { cosine_exp, gaussian };

/// Stationary covariance on the periodic unit interval.
struct CovarianceKernel {
    KernelKind kind = KernelKind::cosine_exp;
    double sigma2 = 1.0;
    double length = 1.0;
    double rescale = 1.0;

    /// k(r) = exp(-(1 - cos(2 pi r))).
    static CovarianceKernel cosine_exp();
    /// C(r) = sigma2 * exp(-(s * r_per / l)^2), r_per = min(|r|, 1 - |r|), s = sqrt(pi)/2 by default.
    static CovarianceKernel gaussian(double sigma2, double length);

    double operator()(double r) const;
    std::string name() const;
};

struct StepFunctionSpec {
    int min_steps = 1;
    int max_steps = 5;
    double min_height = -1.0;
    double max_height = 1.0;
};

/// Circulant-embedding sampler for one (kernel, N) pair. The spectrum is
/// computed once; sampling costs one length-N DFT.
class GrfSampler {
public:
    GrfSampler(const CovarianceKernel& kernel, std::size_t n);

    std::vector<double> sample(std::mt19937_64& rng) const;
    std::size_t size() const { return n_; }
    /// Eigenvalues of the circulant covariance after clipping.
    const std::vector<double>& eigenvalues() const { return *lambda_; }

private:
    std::size_t n_;
    std::shared_ptr<const std::vector<double>> lambda_;
    std::vector<double> amplitude_; // sqrt(lambda / N)
};

std::vector<double> sample_grf(const CovarianceKernel& kernel, std::size_t n, std::uint64_t seed);
std::vector<double> sample_lognormal(const CovarianceKernel& kernel, std::size_t n, std::uint64_t seed);
std::vector<double> sample_steps(const StepFunctionSpec& spec, std::size_t n, std::uint64_t seed);

std::vector<double> sample_steps(const StepFunctionSpec& spec, std::size_t n, std::mt19937_64& rng);

} // namespace fluxlab
