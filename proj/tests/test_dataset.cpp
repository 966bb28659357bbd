#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>

#include "fluxlab/dataset.hpp"
#include "fluxlab/error.hpp"
#include "support/tempdir.hpp"

using namespace fluxlab;
using fluxlab::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("generate_split: cubic shape arithmetic and determinism") {
    TempDir tmp("ds");
    auto m = DatasetManifest::for_split(FluxKind::cubic, "train", 17, 2, 2, 100);
    CHECK(m.ic_family == IcFamily::grf);
    const auto report = generate_split(m, tmp / "a");
    CHECK(report.trajectories == 4);
    CHECK(std::filesystem::file_size(tmp / "a" / "data.f32") == 4u * 2 * 2 * 100 * 100 * 1);
    CHECK(std::filesystem::file_size(tmp / "a" / "coeffs.f32") == 4u * 2 * 3);

    const auto j = nlohmann::json::parse(slurp(tmp / "a" / "manifest.json"));
    CHECK(j.at("equation") == "cubic");
    CHECK(j.at("N_c") == 2);
    CHECK(j.at("N_q") == 1);
    CHECK(j.at("ic_family") == "grf");
    CHECK(j.at("split") == "train");

    generate_split(m, tmp / "b", 3);
    for (const char* f : {"data.f32", "coeffs.f32", "manifest.json"}) {
        CHECK(slurp(tmp / "a" / f) == slurp(tmp / "b" / f));
    }

    const auto ds = Dataset::load(tmp / "a");
    for (std::size_t c = 0; c < 2; ++c) {
        for (double v : ds.coefficients(c)) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
    // stored trajectories still conserve mass up to float32 rounding
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 2; ++i) {
            const auto t = ds.load_trajectory(c, i);
            const double m0 = t.snapshot(0).channel_sum(0);
            double scale = 0.0;
            for (double v : t.values) scale = std::max(scale, std::abs(v));
            for (std::size_t n = 1; n < t.steps; ++n) {
                // each stored value is within 2^-24 relative of the float64 solution
                CHECK(std::abs(t.snapshot(n).channel_sum(0) - m0) <= 2.0 * t.cells * 0x1p-24 * scale + 1e-10);
            }
        }
}

TEST_CASE("generate_split: shallow water channels and OOD manifests") {
    TempDir tmp("sw");
    auto m = DatasetManifest::for_split(FluxKind::shallow_water, "train", 3, 1, 2, 32, 12);
    CHECK(m.n_q == 2);
    CHECK(m.ic_family == IcFamily::lognormal_grf);
    generate_split(m, tmp.path());
    const auto ds = Dataset::load(tmp.path());
    const auto t = ds.load_trajectory(0, 1);
    // channel 0 is the height h > 0
    for (std::size_t i = 0; i < t.cells; ++i) CHECK(t(0, i, 0) > 0.0);

    const auto sine = DatasetManifest::for_split(FluxKind::cubic, "ood-sine", 3, 1, 1, 32);
    CHECK(sine.equation == FluxKind::sine);
    CHECK(sine.ic_family == IcFamily::grf);
    CHECK(sine.n_params() == 2);
    const auto shock = DatasetManifest::for_split(FluxKind::cubic, "ood-shock", 3, 1, 1, 32);
    CHECK(shock.equation == FluxKind::cubic);
    CHECK(shock.ic_family == IcFamily::steps);
    const auto both = DatasetManifest::for_split(FluxKind::cubic, "ood-sine-shock", 3, 1, 1, 32);
    CHECK(both.equation == FluxKind::sine);
    CHECK(both.ic_family == IcFamily::steps);
    const auto sw_shock = DatasetManifest::for_split(FluxKind::shallow_water, "ood-shock", 3, 1, 1, 32);
    const Field ic = sample_initial_condition(sw_shock, 99);
    for (std::size_t i = 0; i < ic.cells; ++i) {
        CHECK(ic(0, i) >= 0.5);
        CHECK(ic(0, i) <= 4.5);
    }
    CHECK_THROWS_AS(DatasetManifest::for_split(FluxKind::cubic, "holdout", 3, 1, 1, 32), ConfigError);
}

TEST_CASE("split seeds are disjoint") {
    std::set<std::uint64_t> seeds;
    for (const auto& s : split_names()) seeds.insert(split_seed(5, s));
    CHECK(seeds.size() == split_names().size());
    CHECK(split_seed(5, "train") != split_seed(6, "train"));

    TempDir tmp("seeds");
    std::set<std::vector<double>> draws;
    for (const char* s : {"train", "val", "test"}) {
        auto m = DatasetManifest::for_split(FluxKind::cubic, s, 5, 6, 1, 16, 3);
        generate_split(m, tmp / s);
        const auto ds = Dataset::load(tmp / s);
        for (std::size_t c = 0; c < 6; ++c) draws.insert(ds.coefficients(c));
    }
    CHECK(draws.size() == 18);
}

TEST_CASE("sample_batch and windows") {
    TempDir tmp("batch");
    auto m = DatasetManifest::for_split(FluxKind::cubic, "train", 1, 2, 3, 16);
    generate_split(m, tmp.path());
    const auto ds = Dataset::load(tmp.path());

    std::mt19937_64 rng(4), rng2(4);
    const auto batch = sample_batch(ds, 200, 20, rng);
    const auto again = sample_batch(ds, 200, 20, rng2);
    std::size_t max_start = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& w = batch[b];
        CHECK(w.start <= 79);
        max_start = std::max(max_start, w.start);
        CHECK(w.context.size() == 20u * 16);
        const auto t = ds.load_trajectory(w.coeff_index, w.ic_index);
        for (std::size_t x = 0; x < 16; ++x) {
            CHECK(w.target[x] == t(w.start + 20, x, 0));
            CHECK(w.context[x] == t(w.start, x, 0));
            CHECK(w.context[19 * 16 + x] == t(w.start + 19, x, 0));
        }
        CHECK(w.context == again[b].context);
        CHECK(w.target == again[b].target);
    }
    CHECK(max_start > 60);
    CHECK(sample_batch(ds, 3, 99, rng).size() == 3);
    CHECK_THROWS_AS(sample_batch(ds, 1, 100, rng), ConfigError);
}

TEST_CASE("load_trajectory round trip and format errors") {
    TempDir tmp("fmt");
    DatasetManifest m = DatasetManifest::for_split(FluxKind::cubic, "test", 2, 1, 2, 8, 5);
    std::mt19937_64 rng(1);
    std::normal_distribution<float> normal;
    std::vector<float> data(m.total_values());
    for (float& v : data) v = normal(rng);
    write_f32(tmp / "data.f32", data);
    write_f32(tmp / "coeffs.f32", {0.1f, 0.2f, 0.3f});
    write_manifest(m, tmp / "manifest.json");

    const auto ds = Dataset::load(tmp.path());
    const auto t = ds.load_trajectory(0, 1);
    for (std::size_t j = 0; j < t.values.size(); ++j) CHECK(t.values[j] == static_cast<double>(data[m.trajectory_size() + j]));
    CHECK_THROWS_AS(ds.load_trajectory(0, 2), ConfigError);
    CHECK_THROWS_AS(ds.load_trajectory(1, 0), ConfigError);

    m.n_x = 16;
    m.dx = 1.0 / 16;
    write_manifest(m, tmp / "manifest.json");
    CHECK_THROWS_AS(Dataset::load(tmp.path()), FormatError);

    std::ofstream(tmp / "data.f32", std::ios::app) << "x";
    CHECK_THROWS_AS(read_f32(tmp / "data.f32"), FormatError);
}
