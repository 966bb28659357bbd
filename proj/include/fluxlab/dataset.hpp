#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fluxlab/fv.hpp"

namespace fluxlab {

enum class IcFamily { grf, steps, lognormal_grf };

std::string to_string(IcFamily f);
IcFamily ic_family_from_string(const std::string& s);
std::string to_string(FluxKind k);
FluxKind flux_kind_from_string(const std::string& s);

/// Named splits. The three OOD splits mirror the paper's regimes: shifted ICs,
/// a different flux family, and both.
const std::vector<std::string>& split_names();
bool is_split_name(const std::string& s);

struct DatasetManifest {
    FluxKind equation = FluxKind::cubic;
    std::vector<std::pair<double, double>> coeff_ranges;
    std::size_t n_coeffs = 20; // N_c
    std::size_t n_init = 10;   // N_init
    std::size_t n_t = 100;
    std::size_t n_x = 100;
    std::size_t n_q = 1;
    double dt = 0.005;
    double dx = 0.01;
    IcFamily ic_family = IcFamily::grf;
    std::uint64_t seed = 0;
    std::string split = "train";

    std::size_t n_params() const { return coeff_ranges.size(); }
    std::size_t trajectory_size() const { return n_t * n_x * n_q; }
    std::size_t total_values() const { return n_coeffs * n_init * trajectory_size(); }
    void validate() const;

    /// Manifest for a named split given the in-distribution equation family.
    static DatasetManifest for_split(FluxKind train_equation, const std::string& split, std::uint64_t global_seed,
                                     std::size_t n_coeffs, std::size_t n_init, std::size_t n_x, std::size_t n_t = 100);
};

/// Default uniform coefficient ranges per family.
std::vector<std::pair<double, double>> default_coeff_ranges(FluxKind kind);

/// Seed of a split: a mix of the global seed and a hash of the split name.
std::uint64_t split_seed(std::uint64_t global_seed, const std::string& split);

FluxModel make_model(FluxKind kind, const std::vector<double>& coeffs);

/// Initial condition for one (coefficient, IC, attempt) slot of a split.
Field sample_initial_condition(const DatasetManifest& m, std::uint64_t seed);

struct GenerationReport {
    std::size_t trajectories = 0;
    std::size_t resampled = 0; // ICs replaced after a solver divergence
};

/// Samples coefficients and ICs, solves every trajectory, writes manifest.json,
/// data.f32 and coeffs.f32 into `dir`. Deterministic for a given manifest,
/// independent of `jobs`.
GenerationReport generate_split(const DatasetManifest& manifest, const std::filesystem::path& dir, std::size_t jobs = 1);

struct ContextWindow {
    std::vector<double> context; // [k, N_x, d]
    std::vector<double> target;  // [N_x, d]
    std::size_t k = 0, n_x = 0, d = 0;
    double dt = 0.0, dx = 0.0;
    std::size_t coeff_index = 0, ic_index = 0, start = 0;
};

/// In-memory view of a split (float32 values as stored, widened on access).
class Dataset {
public:
    static Dataset load(const std::filesystem::path& dir);

    const DatasetManifest& manifest() const { return manifest_; }
    std::size_t trajectories() const { return manifest_.n_coeffs * manifest_.n_init; }

    Trajectory load_trajectory(std::size_t c, std::size_t i) const;
    std::vector<double> coefficients(std::size_t c) const;
    /// Window with snapshots [start, start + k) and target start + k.
    ContextWindow window(std::size_t c, std::size_t i, std::size_t start, std::size_t k) const;

    Dataset(DatasetManifest manifest, std::vector<float> data, std::vector<float> coeffs);

private:
    DatasetManifest manifest_;
    std::vector<float> data_;
    std::vector<float> coeffs_;
};

/// Uniform draws over (coefficient, IC, start in [0, N_t - k - 1]).
std::vector<ContextWindow> sample_batch(const Dataset& data, std::size_t batch_size, std::size_t k,
                                        std::mt19937_64& rng);

void write_manifest(const DatasetManifest& m, const std::filesystem::path& file);
DatasetManifest read_manifest(const std::filesystem::path& file);

void write_f32(const std::filesystem::path& file, const std::vector<float>& values);
std::vector<float> read_f32(const std::filesystem::path& file);

} // namespace fluxlab
