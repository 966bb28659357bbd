#include "fluxlab/dft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "fluxlab/error.hpp"

namespace fluxlab {

DftTable::DftTable(std::size_t n) : n_(n), cos_(n), sin_(n) {
    if (n == 0) throw ConfigError("DFT length must be positive");
    for (std::size_t j = 0; j < n; ++j) {
        if (4 * j % n == 0) {
            // quarter turns: exact values
            switch (4 * j / n) {
                case 0: cos_[j] = 1.0; sin_[j] = 0.0; break;
                case 1: cos_[j] = 0.0; sin_[j] = 1.0; break;
                case 2: cos_[j] = -1.0; sin_[j] = 0.0; break;
                default: cos_[j] = 0.0; sin_[j] = -1.0; break;
            }
            continue;
        }
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
        cos_[j] = std::cos(angle);
        sin_[j] = std::sin(angle);
    }
}

std::shared_ptr<const DftTable> DftTable::get(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, std::shared_ptr<const DftTable>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_shared<const DftTable>(n);
    return slot;
}

std::vector<std::complex<double>> dft(std::span<const std::complex<double>> x, int sign) {
    const std::size_t n = x.size();
    const auto table = DftTable::get(n);
    const double s = sign < 0 ? -1.0 : 1.0;
    std::vector<std::complex<double>> out(n);
    for (std::size_t m = 0; m < n; ++m) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t idx = (j * m) % n;
            acc += x[j] * std::complex<double>(table->cos(idx), s * table->sin(idx));
        }
        out[m] = acc;
    }
    return out;
}

} // namespace fluxlab
