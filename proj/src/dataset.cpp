#include "fluxlab/dataset.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fluxlab/error.hpp"
#include "fluxlab/grf.hpp"
#include "fluxlab/parallel.hpp"

namespace fluxlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kMaxRetries = 5;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t slot_seed(std::uint64_t split, std::size_t c, std::size_t i, int attempt) {
    std::uint64_t s = splitmix64(split ^ 0x5bd1e995ULL);
    s = splitmix64(s + c);
    s = splitmix64(s + i);
    return splitmix64(s + static_cast<std::uint64_t>(attempt));
}

const CovarianceKernel& shallow_water_kernel() {
    static const CovarianceKernel k = CovarianceKernel::gaussian(0.5, 0.3);
    return k;
}

} // namespace

std::string to_string(IcFamily f) {
    switch (f) {
        case IcFamily::grf: return "grf";
        case IcFamily::steps: return "steps";
        case IcFamily::lognormal_grf: return "lognormal+grf";
    }
    return "?";
}

IcFamily ic_family_from_string(const std::string& s) {
    if (s == "grf") return IcFamily::grf;
    if (s == "steps") return IcFamily::steps;
    if (s == "lognormal+grf") return IcFamily::lognormal_grf;
    throw ConfigError("unknown ic_family '" + s + "'");
}

std::string to_string(FluxKind k) {
    switch (k) {
    case FluxKind::cubic:
        return "cubic";
    case FluxKind::sine:
        return "sine";
    case FluxKind::shallow_water:
        return "shallow_water";
    case FluxKind::viscous_burgers:
        return "viscous_burgers";
    }
    return "?";
}

FluxKind flux_kind_from_string(const std::string& s) {
    if (s == "cubic") return FluxKind::cubic;
    if (s == "sine") return FluxKind::sine;
    if (s == "shallow_water") return FluxKind::shallow_water;
    if (s == "viscous_burgers") return FluxKind::viscous_burgers;
    throw ConfigError("unknown equation '" + s + "'");
}

const std::vector<std::string>& split_names() {
    static const std::vector<std::string> names{"train", "val", "test", "ood-shock", "ood-sine", "ood-sine-shock"};
    return names;
}

bool is_split_name(const std::string& s) {
    const auto& n = split_names();
    return std::find(n.begin(), n.end(), s) != n.end();
}

std::vector<std::pair<double, double>> default_coeff_ranges(FluxKind kind) {
    switch (kind) {
        case FluxKind::cubic: return {{-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}};
        case FluxKind::sine: return {{-1.0, 1.0}, {-1.0, 1.0}};
        case FluxKind::shallow_water: return {{0.5, 1.5}, {0.5, 1.5}, {8.0, 12.0}};
        case FluxKind::viscous_burgers: return {{0.5, 1.5}, {0.005, 0.015}};
    }
    return {};
}

std::uint64_t split_seed(std::uint64_t global_seed, const std::string& split) {
    return splitmix64(splitmix64(global_seed) ^ fnv1a(split));
}

FluxModel make_model(FluxKind kind, const std::vector<double>& c) {
    auto need = [&](std::size_t n) {
        if (c.size() != n) throw ConfigError("expected " + std::to_string(n) + " flux coefficients");
    };
    switch (kind) {
        case FluxKind::cubic: need(3); return FluxModel::cubic(c[0], c[1], c[2]);
        case FluxKind::sine: need(2); return FluxModel::sine(c[0], c[1]);
        case FluxKind::shallow_water: need(3); return FluxModel::shallow_water(c[0], c[1], c[2]);
        case FluxKind::viscous_burgers: need(2); return FluxModel::viscous_burgers(c[0], c[1]);
    }
    throw ConfigError("unknown flux kind");
}

void DatasetManifest::validate() const {
    if (n_coeffs == 0 || n_init == 0 || n_t < 2 || n_x < 4) throw ConfigError("manifest: empty dataset dimensions");
    if (n_q != FluxModel{equation, {}}.channels()) throw ConfigError("manifest: N_q does not match the equation");
    if (coeff_ranges.size() != default_coeff_ranges(equation).size()) {
        throw ConfigError("manifest: wrong number of coefficient ranges for " + FluxModel{equation, {}}.name());
    }
    for (const auto& [lo, hi] : coeff_ranges) {
        if (!(lo <= hi)) throw ConfigError("manifest: empty coefficient range");
    }
    if (!(dt > 0.0) || !(dx > 0.0)) throw ConfigError("manifest: dt and dx must be positive");
    if (std::abs(dx * static_cast<double>(n_x) - 1.0) > 1e-12) throw ConfigError("manifest: dx must equal 1/N_x");
    if (ic_family == IcFamily::lognormal_grf && equation != FluxKind::shallow_water) {
        throw ConfigError("manifest: lognormal+grf ICs apply to shallow water only");
    }
    if (equation == FluxKind::shallow_water && ic_family == IcFamily::grf) {
        throw ConfigError("manifest: shallow-water heights need lognormal+grf or steps ICs");
    }
}

DatasetManifest DatasetManifest::for_split(FluxKind train_equation, const std::string& split, std::uint64_t global_seed,
                                           std::size_t n_coeffs, std::size_t n_init, std::size_t n_x, std::size_t n_t) {
    if (!is_split_name(split)) throw ConfigError("unknown split '" + split + "'");
    DatasetManifest m;
    m.split = split;
    m.seed = global_seed;
    m.n_coeffs = n_coeffs;
    m.n_init = n_init;
    m.n_x = n_x;
    m.n_t = n_t;
    m.dx = 1.0 / static_cast<double>(n_x);
    const bool sine = split == "ood-sine" || split == "ood-sine-shock";
    const bool shock = split == "ood-shock" || split == "ood-sine-shock";
    m.equation = sine ? FluxKind::sine : train_equation;
    if (sine && train_equation == FluxKind::shallow_water) {
        throw ConfigError("sine-flux OOD splits are scalar; train equation is shallow_water");
    }
    m.n_q = FluxModel{m.equation, {}}.channels();
    m.coeff_ranges = default_coeff_ranges(m.equation);
    if (shock) {
        m.ic_family = IcFamily::steps;
    } else {
        m.ic_family = m.equation == FluxKind::shallow_water ? IcFamily::lognormal_grf : IcFamily::grf;
    }
    m.validate();
    return m;
}

Field sample_initial_condition(const DatasetManifest& m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = m.n_x;
    if (m.equation == FluxKind::shallow_water) {
        // channels (h, m); m(0) is a GRF in both IC families
        Field f(2, n);
        std::vector<double> h;
        if (m.ic_family == IcFamily::steps) {
            h = sample_steps(StepFunctionSpec{1, 5, 0.5, 4.5}, n, rng);
        } else {
            h = GrfSampler(shallow_water_kernel(), n).sample(rng);
            for (double& v : h) v = std::exp(v);
        }
        const auto mom = GrfSampler(shallow_water_kernel(), n).sample(rng);
        for (std::size_t i = 0; i < n; ++i) {
            f(0, i) = h[i];
            f(1, i) = mom[i];
        }
        return f;
    }
    if (m.ic_family == IcFamily::steps) return Field(1, n, sample_steps(StepFunctionSpec{1, 5, -1.0, 1.0}, n, rng));
    return Field(1, n, GrfSampler(CovarianceKernel::cosine_exp(), n).sample(rng));
}

void write_f32(const fs::path& file, const std::vector<float>& values) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + file.string() + " for writing");
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 4));
    } else {
        for (float v : values) {
            const auto bits = __builtin_bswap32(std::bit_cast<std::uint32_t>(v));
            out.write(reinterpret_cast<const char*>(&bits), 4);
        }
    }
    if (!out) throw Error("write failed for " + file.string());
}

std::vector<float> read_f32(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot open " + file.string());
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (bytes % 4 != 0) throw FormatError(file.string() + ": length " + std::to_string(bytes) + " is not a multiple of 4");
    std::vector<float> values(bytes / 4);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw FormatError("short read on " + file.string());
    if constexpr (std::endian::native != std::endian::little) {
        for (float& v : values) v = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(v)));
    }
    return values;
}

void write_manifest(const DatasetManifest& m, const fs::path& file) {
    json ranges = json::array();
    for (const auto& [lo, hi] : m.coeff_ranges) ranges.push_back({lo, hi});
    const json j{
        {"equation", FluxModel{m.equation, {}}.name()},
        {"coeff_ranges", ranges},
        {"N_c", m.n_coeffs},
        {"N_init", m.n_init},
        {"N_t", m.n_t},
        {"N_x", m.n_x},
        {"N_q", m.n_q},
        {"dt", m.dt},
        {"dx", m.dx},
        {"ic_family", to_string(m.ic_family)},
        {"seed", m.seed},
        {"split", m.split},
        {"data", {{"file", "data.f32"}, {"dtype", "float32-le"}, {"layout", "N_c,N_init,N_t,N_x,N_q"}}},
        {"coeffs", {{"file", "coeffs.f32"}, {"dtype", "float32-le"}, {"layout", "N_c,n_params"}}},
    };
    std::ofstream out(file);
    if (!out) throw Error("cannot open " + file.string() + " for writing");
    out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw FormatError("cannot open " + file.string());
    json j;
    try {
        in >> j;
        DatasetManifest m;
        m.equation = flux_kind_from_string(j.at("equation").get<std::string>());
        m.coeff_ranges.clear();
        for (const auto& r : j.at("coeff_ranges")) m.coeff_ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
        m.n_coeffs = j.at("N_c").get<std::size_t>();
        m.n_init = j.at("N_init").get<std::size_t>();
        m.n_t = j.at("N_t").get<std::size_t>();
        m.n_x = j.at("N_x").get<std::size_t>();
        m.n_q = j.at("N_q").get<std::size_t>();
        m.dt = j.at("dt").get<double>();
        m.dx = j.at("dx").get<double>();
        m.ic_family = ic_family_from_string(j.at("ic_family").get<std::string>());
        m.seed = j.at("seed").get<std::uint64_t>();
        m.split = j.at("split").get<std::string>();
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw FormatError(file.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(file.string() + ": " + e.what());
    }
}

GenerationReport generate_split(const DatasetManifest& manifest, const fs::path& dir, std::size_t jobs) {
    manifest.validate();
    const auto sseed = split_seed(manifest.seed, manifest.split);

    std::mt19937_64 coeff_rng(sseed);
    std::vector<std::vector<double>> coeffs(manifest.n_coeffs);
    for (auto& c : coeffs) {
        for (const auto& [lo, hi] : manifest.coeff_ranges) {
            c.push_back(lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(coeff_rng));
        }
    }

    const std::size_t total = manifest.n_coeffs * manifest.n_init;
    const std::size_t traj_size = manifest.trajectory_size();
    std::vector<float> data(manifest.total_values());
    std::vector<int> retries(total, 0);
    const SaveGrid grid{manifest.n_t, manifest.dt};

    parallel_for(total, jobs, [&](std::size_t slot) {
        const std::size_t c = slot / manifest.n_init, i = slot % manifest.n_init;
        const FluxModel model = make_model(manifest.equation, coeffs[c]);
        const SolverConfig cfg = SolverConfig::for_model(model);
        for (int attempt = 0;; ++attempt) {
            const Field ic = sample_initial_condition(manifest, slot_seed(sseed, c, i, attempt));
            try {
                const Trajectory traj = solve(model, ic, grid, cfg);
                for (std::size_t j = 0; j < traj_size; ++j) data[slot * traj_size + j] = static_cast<float>(traj.values[j]);
                retries[slot] = attempt;
                return;
            } catch (const DivergenceError& e) {
                if (attempt >= kMaxRetries) {
                    std::ostringstream os;
                    os << "split " << manifest.split << ": coefficient " << c << " IC " << i << " diverged on "
                       << (attempt + 1) << " attempts; last error: " << e.what();
                    throw Error(os.str());
                }
            }
        }
    });

    GenerationReport report;
    report.trajectories = total;
    for (int r : retries) report.resampled += static_cast<std::size_t>(r);
    if (report.resampled > 0) {
        spdlog::info("split {}: resampled {} initial conditions after solver divergence", manifest.split, report.resampled);
    }

    fs::create_directories(dir);
    std::vector<float> coeff_values;
    for (const auto& c : coeffs)
        for (double v : c) coeff_values.push_back(static_cast<float>(v));
    write_f32(dir / "data.f32", data);
    write_f32(dir / "coeffs.f32", coeff_values);
    write_manifest(manifest, dir / "manifest.json");
    return report;
}

Dataset::Dataset(DatasetManifest manifest, std::vector<float> data, std::vector<float> coeffs)
    : manifest_(std::move(manifest)), data_(std::move(data)), coeffs_(std::move(coeffs)) {
    if (data_.size() != manifest_.total_values()) {
        throw FormatError("data holds " + std::to_string(data_.size()) + " values, manifest implies " +
                          std::to_string(manifest_.total_values()));
    }
    if (coeffs_.size() != manifest_.n_coeffs * manifest_.n_params()) {
        throw FormatError("coefficient table holds " + std::to_string(coeffs_.size()) + " values, manifest implies " +
                          std::to_string(manifest_.n_coeffs * manifest_.n_params()));
    }
}

Dataset Dataset::load(const fs::path& dir) {
    DatasetManifest m = read_manifest(dir / "manifest.json");
    return Dataset(std::move(m), read_f32(dir / "data.f32"), read_f32(dir / "coeffs.f32"));
}

Trajectory Dataset::load_trajectory(std::size_t c, std::size_t i) const {
    if (c >= manifest_.n_coeffs || i >= manifest_.n_init) {
        throw ConfigError("trajectory (" + std::to_string(c) + ", " + std::to_string(i) + ") out of range");
    }
    Trajectory t;
    t.steps = manifest_.n_t;
    t.cells = manifest_.n_x;
    t.channels = manifest_.n_q;
    const std::size_t size = manifest_.trajectory_size();
    const float* src = data_.data() + (c * manifest_.n_init + i) * size;
    t.values.assign(src, src + size);
    return t;
}

std::vector<double> Dataset::coefficients(std::size_t c) const {
    if (c >= manifest_.n_coeffs) throw ConfigError("coefficient index out of range");
    const std::size_t p = manifest_.n_params();
    return {coeffs_.begin() + static_cast<std::ptrdiff_t>(c * p), coeffs_.begin() + static_cast<std::ptrdiff_t>((c + 1) * p)};
}

ContextWindow Dataset::window(std::size_t c, std::size_t i, std::size_t start, std::size_t k) const {
    if (c >= manifest_.n_coeffs || i >= manifest_.n_init) throw ConfigError("window: trajectory index out of range");
    if (k == 0 || start + k >= manifest_.n_t) throw ConfigError("window: snapshots out of range");
    ContextWindow w;
    w.k = k;
    w.n_x = manifest_.n_x;
    w.d = manifest_.n_q;
    w.dt = manifest_.dt;
    w.dx = manifest_.dx;
    w.coeff_index = c;
    w.ic_index = i;
    w.start = start;
    const std::size_t snap = manifest_.n_x * manifest_.n_q;
    const float* base = data_.data() + (c * manifest_.n_init + i) * manifest_.trajectory_size();
    w.context.assign(base + start * snap, base + (start + k) * snap);
    w.target.assign(base + (start + k) * snap, base + (start + k + 1) * snap);
    return w;
}

std::vector<ContextWindow> sample_batch(const Dataset& data, std::size_t batch_size, std::size_t k,
                                        std::mt19937_64& rng) {
    const auto& m = data.manifest();
    if (k == 0 || k + 1 > m.n_t) {
        throw ConfigError("context length " + std::to_string(k) + " needs k + 1 <= N_t = " + std::to_string(m.n_t));
    }
    std::uniform_int_distribution<std::size_t> pick_c(0, m.n_coeffs - 1), pick_i(0, m.n_init - 1),
        pick_start(0, m.n_t - k - 1);
    std::vector<ContextWindow> batch;
    batch.reserve(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
        const std::size_t c = pick_c(rng);
        const std::size_t i = pick_i(rng);
        const std::size_t s = pick_start(rng);
        batch.push_back(data.window(c, i, s, k));
    }
    return batch;
}

} // namespace fluxlab
