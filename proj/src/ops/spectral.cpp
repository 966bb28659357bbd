#include <map>
#include <mutex>

#include "common.hpp"
#include "fluxlab/dft.hpp"
#include "fluxlab/ops.hpp"

namespace fluxlab {

using detail::ConstMatMap;
using detail::grad_of;
using detail::MatMap;
using detail::out_grad;
using detail::RowMat;

namespace {

/// Truncated real-DFT bases for a (N, M) pair.
struct SpectralBasis {
    RowMat cos_fwd, sin_fwd; // [N, M]: cos/sin(2 pi n m / N)
    RowMat cos_inv, sin_inv; // [M, N]: same, scaled by the irfft weight c_m / N
};

std::shared_ptr<const SpectralBasis> spectral_basis(std::size_t n, std::size_t modes) {
    static std::mutex mutex;
    static std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const SpectralBasis>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[{n, modes}];
    if (slot) return slot;
    const auto table = DftTable::get(n);
    auto basis = std::make_shared<SpectralBasis>();
    const auto ln = static_cast<Eigen::Index>(n), lm = static_cast<Eigen::Index>(modes);
    basis->cos_fwd.resize(ln, lm);
    basis->sin_fwd.resize(ln, lm);
    basis->cos_inv.resize(lm, ln);
    basis->sin_inv.resize(lm, ln);
    for (std::size_t m = 0; m < modes; ++m) {
        // Hermitian weight: DC and Nyquist appear once in the full spectrum, others twice.
        const double weight = (m == 0 || 2 * m == n) ? 1.0 : 2.0;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t idx = (j * m) % n;
            const auto r = static_cast<Eigen::Index>(j), c = static_cast<Eigen::Index>(m);
            basis->cos_fwd(r, c) = table->cos(idx);
            basis->sin_fwd(r, c) = table->sin(idx);
            basis->cos_inv(c, r) = weight * table->cos(idx) / static_cast<double>(n);
            basis->sin_inv(c, r) = weight * table->sin(idx) / static_cast<double>(n);
        }
    }
    slot = std::move(basis);
    return slot;
}

} // namespace

Tensor circular_spectral_conv(const Tensor& z, const Tensor& modes) {
    const Shape& sz = z.shape();
    const Shape& sm = modes.shape();
    if (sz.size() < 2 || sm.size() < 4 || sm.back() != 2) {
        throw ShapeError("circular_spectral_conv: expected z [.., w_in, N] and modes [.., w_out, w_in, M, 2], got " +
                         to_string(sz) + " and " + to_string(sm));
    }
    const std::size_t n = sz.back();
    const std::size_t w_in = sz[sz.size() - 2];
    const std::size_t w_out = sm[sm.size() - 4];
    const std::size_t m_count = sm[sm.size() - 2];
    if (sm[sm.size() - 3] != w_in) {
        throw ShapeError("circular_spectral_conv: modes " + to_string(sm) + " do not match input width of " +
                         to_string(sz));
    }
    if (n % 2 != 0) throw ConfigError("circular_spectral_conv: grid size must be even, got " + std::to_string(n));
    if (m_count == 0 || m_count > n / 2 + 1) {
        throw ConfigError("circular_spectral_conv: " + std::to_string(m_count) +
                          " modes out of range for N = " + std::to_string(n));
    }
    const Shape z_batch(sz.begin(), sz.end() - 2);
    const Shape m_batch(sm.begin(), sm.end() - 4);
    const bool shared = m_batch.empty();
    if (!shared && m_batch != z_batch) {
        throw ShapeError("circular_spectral_conv: modes batch " + to_string(sm) + " does not match input " +
                         to_string(sz));
    }
    const std::size_t batch = numel(z_batch);
    const std::size_t w_size = w_out * w_in * m_count * 2;
    const auto basis = spectral_basis(n, m_count);
    const auto ln = static_cast<Eigen::Index>(n), lm = static_cast<Eigen::Index>(m_count),
               lwi = static_cast<Eigen::Index>(w_in), lwo = static_cast<Eigen::Index>(w_out);

    // forward spectra of the input, kept for the adjoint
    auto z_re = std::make_shared<Buffer>(batch * w_in * m_count);
    auto z_im = std::make_shared<Buffer>(batch * w_in * m_count);
    Shape out(z_batch);
    out.push_back(w_out);
    out.push_back(n);
    Buffer data(batch * w_out * n);
    RowMat y_re(lwo, lm), y_im(lwo, lm);
    for (std::size_t b = 0; b < batch; ++b) {
        ConstMatMap zb(z.data().data() + b * w_in * n, lwi, ln);
        MatMap zr(z_re->data() + b * w_in * m_count, lwi, lm);
        MatMap zi(z_im->data() + b * w_in * m_count, lwi, lm);
        zr.noalias() = zb * basis->cos_fwd;
        zi.noalias() = -(zb * basis->sin_fwd);
        const double* w = modes.data().data() + (shared ? 0 : b * w_size);
        y_re.setZero();
        y_im.setZero();
        for (std::size_t o = 0; o < w_out; ++o)
            for (std::size_t c = 0; c < w_in; ++c)
                for (std::size_t m = 0; m < m_count; ++m) {
                    const double wr = w[((o * w_in + c) * m_count + m) * 2];
                    const double wi = w[((o * w_in + c) * m_count + m) * 2 + 1];
                    const double ar = zr(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(m));
                    const double ai = zi(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(m));
                    y_re(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(m)) += wr * ar - wi * ai;
                    y_im(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(m)) += wr * ai + wi * ar;
                }
        MatMap(data.data() + b * w_out * n, lwo, ln).noalias() = y_re * basis->cos_inv - y_im * basis->sin_inv;
    }
    Tensor result = make_result(std::move(out), std::move(data));
    Tape::current().record("circular_spectral_conv", {z, modes}, result, [=]() {
        const double* g = out_grad(result);
        double* gz = grad_of(z);
        double* gw = grad_of(modes);
        RowMat g_re(lwo, lm), g_im(lwo, lm), gz_re(lwi, lm), gz_im(lwi, lm);
        for (std::size_t b = 0; b < batch; ++b) {
            ConstMatMap gb(g + b * w_out * n, lwo, ln);
            g_re.noalias() = gb * basis->cos_inv.transpose();
            g_im.noalias() = -(gb * basis->sin_inv.transpose());
            ConstMatMap zr(z_re->data() + b * w_in * m_count, lwi, lm);
            ConstMatMap zi(z_im->data() + b * w_in * m_count, lwi, lm);
            const double* w = modes.data().data() + (shared ? 0 : b * w_size);
            double* gwb = gw ? gw + (shared ? 0 : b * w_size) : nullptr;
            gz_re.setZero();
            gz_im.setZero();
            for (std::size_t o = 0; o < w_out; ++o)
                for (std::size_t c = 0; c < w_in; ++c)
                    for (std::size_t m = 0; m < m_count; ++m) {
                        const auto io = static_cast<Eigen::Index>(o), ic = static_cast<Eigen::Index>(c),
                                   im = static_cast<Eigen::Index>(m);
                        const std::size_t wix = ((o * w_in + c) * m_count + m) * 2;
                        const double gr = g_re(io, im), gi = g_im(io, im);
                        if (gwb) {
                            gwb[wix] += gr * zr(ic, im) + gi * zi(ic, im);
                            gwb[wix + 1] += -gr * zi(ic, im) + gi * zr(ic, im);
                        }
                        gz_re(ic, im) += gr * w[wix] + gi * w[wix + 1];
                        gz_im(ic, im) += -gr * w[wix + 1] + gi * w[wix];
                    }
            if (gz) {
                MatMap(gz + b * w_in * n, lwi, ln).noalias() +=
                    gz_re * basis->cos_fwd.transpose() - gz_im * basis->sin_fwd.transpose();
            }
        }
    });
    return result;
}

} // namespace fluxlab
