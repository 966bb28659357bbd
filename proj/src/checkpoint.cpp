#include "fluxlab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "fluxlab/error.hpp"

namespace fluxlab {

namespace fs = std::filesystem;
using nlohmann::json;

void write_f64(const fs::path& file, const std::vector<double>& values) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + file.string() + " for writing");
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 8));
    } else {
        for (double v : values) {
            const auto bits = __builtin_bswap64(std::bit_cast<std::uint64_t>(v));
            out.write(reinterpret_cast<const char*>(&bits), 8);
        }
    }
    if (!out) throw Error("write failed for " + file.string());
}

std::vector<double> read_f64(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot open " + file.string());
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (bytes % 8 != 0) throw FormatError(file.string() + ": length " + std::to_string(bytes) + " is not a multiple of 8");
    std::vector<double> values(bytes / 8);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw FormatError("short read on " + file.string());
    if constexpr (std::endian::native != std::endian::little) {
        for (double& v : values) v = std::bit_cast<double>(__builtin_bswap64(std::bit_cast<std::uint64_t>(v)));
    }
    return values;
}

namespace {

json layout_json(const ParamLayout& layout) {
    json slots = json::array();
    for (const auto& s : layout.slots) slots.push_back({{"name", s.name}, {"offset", s.offset}, {"shape", s.shape}});
    return {{"q", layout.q}, {"slots", slots}};
}

json params_json(const ParamSet& params) {
    json out = json::array();
    for (const auto& [name, t] : params) out.push_back({{"name", name}, {"shape", t.shape()}});
    return out;
}

} // namespace

bool has_checkpoint(const fs::path& dir) { return fs::exists(dir / "checkpoint.json"); }

void save_checkpoint(const fs::path& dir, const HFluxNO& model, const RunConfig& config, const GridInfo& grid,
                     const TrainState& state) {
    fs::create_directories(dir);
    write_f64(dir / "params.f64", model.params().flatten());
    std::vector<double> moments = state.m;
    moments.insert(moments.end(), state.v.begin(), state.v.end());
    write_f64(dir / "moments.f64", moments);

    const json j{
        {"format", "fluxlab-checkpoint-1"},
        {"step", state.step},
        {"optimizer_steps", state.optimizer_steps},
        {"rng_state", state.rng_state},
        {"config", to_json(config)},
        {"grid", {{"equation", grid.equation}, {"n_x", grid.n_x}, {"d", grid.d}, {"dt", grid.dt}, {"dx", grid.dx}}},
        {"layout", layout_json(model.layout())},
        {"parameters", params_json(model.params())},
        {"parameter_count", model.params().numel()},
        {"files", {{"params", "params.f64"}, {"moments", "moments.f64"}}},
    };
    const fs::path tmp = dir / "checkpoint.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << j.dump(2) << "\n";
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, dir / "checkpoint.json");
}

Checkpoint load_checkpoint(const fs::path& dir) {
    const fs::path file = dir / "checkpoint.json";
    std::ifstream in(file);
    if (!in) throw FormatError("no checkpoint at " + dir.string());
    json j;
    Checkpoint c;
    try {
        j = json::parse(in);
        c.config = config_from_json(j.at("config"));
        const auto& g = j.at("grid");
        c.grid = {g.at("equation").get<std::string>(), g.at("n_x").get<std::size_t>(), g.at("d").get<std::size_t>(),
                  g.at("dt").get<double>(), g.at("dx").get<double>()};
        c.state.step = j.at("step").get<std::size_t>();
        c.state.optimizer_steps = j.at("optimizer_steps").get<std::size_t>();
        c.state.rng_state = j.at("rng_state").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(file.string() + ": " + e.what());
    }

    c.model = std::make_unique<HFluxNO>(c.config.model, c.grid.n_x, c.grid.d, c.grid.dt, c.grid.dx, c.config.seed);
    if (j.at("layout") != layout_json(c.model->layout()) || j.at("parameters") != params_json(c.model->params())) {
        throw FormatError(file.string() + ": recorded layout does not match the configured model");
    }
    const auto params = read_f64(dir / j.at("files").at("params").get<std::string>());
    if (params.size() != c.model->params().numel()) {
        throw FormatError("params.f64 holds " + std::to_string(params.size()) + " values, expected " +
                          std::to_string(c.model->params().numel()));
    }
    c.model->params().assign(params);
    auto moments = read_f64(dir / j.at("files").at("moments").get<std::string>());
    const std::size_t n = params.size();
    if (moments.size() != 2 * n && !moments.empty()) {
        throw FormatError("moments.f64 holds " + std::to_string(moments.size()) + " values, expected " +
                          std::to_string(2 * n));
    }
    if (!moments.empty()) {
        c.state.m.assign(moments.begin(), moments.begin() + static_cast<std::ptrdiff_t>(n));
        c.state.v.assign(moments.begin() + static_cast<std::ptrdiff_t>(n), moments.end());
    }
    return c;
}

} // namespace fluxlab
