#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fluxlab/checkpoint.hpp"
#include "fluxlab/config.hpp"
#include "fluxlab/dataset.hpp"
#include "fluxlab/error.hpp"
#include "fluxlab/evaluate.hpp"
#include "fluxlab/report.hpp"
#include "fluxlab/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fluxlab;

namespace {

struct Options {
    std::size_t jobs = 1;
    std::optional<std::uint64_t> seed;

    std::string config, split, out, data, checkpoint, protocol = "single_step", mode, aggregation, eval_dir, kind;
    std::optional<std::size_t> steps;
    bool resume = false;
    bool no_svg = false;
};

/// --seed, then FLUXLAB_SEED, then the file.
RunConfig resolve_config(const Options& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (auto s = seed_from_env()) c.seed = *s;
    if (o.seed) c.seed = *o.seed;
    if (o.steps) c.train.steps = *o.steps;
    c.train.seed = c.seed;
    c.validate();
    return c;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

GridInfo grid_of(const DatasetManifest& m) { return {to_string(m.equation), m.n_x, m.n_q, m.dt, m.dx}; }

void check_grid(const GridInfo& grid, const DatasetManifest& m, const std::string& what) {
    std::vector<std::string> diffs;
    if (grid.n_x != m.n_x) diffs.push_back("n_x " + std::to_string(grid.n_x) + " vs " + std::to_string(m.n_x));
    if (grid.d != m.n_q) diffs.push_back("channels " + std::to_string(grid.d) + " vs " + std::to_string(m.n_q));
    if (grid.dt != m.dt) diffs.push_back("dt " + fmt(grid.dt) + " vs " + fmt(m.dt));
    if (grid.dx != m.dx) diffs.push_back("dx " + fmt(grid.dx) + " vs " + fmt(m.dx));
    if (diffs.empty()) return;
    std::string msg = what + " does not match the dataset '" + m.split + "':";
    for (const auto& d : diffs) msg += " " + d + ";";
    throw ConfigError(msg);
}

int cmd_datagen(const Options& o) {
    const RunConfig c = resolve_config(o);
    const bool train = o.split == "train";
    const auto m = DatasetManifest::for_split(c.data.equation, o.split, c.seed,
                                              train ? c.data.n_coeffs : c.data.holdout_n_coeffs,
                                              train ? c.data.n_init : c.data.holdout_n_init, c.data.n_x, c.data.n_t);
    const fs::path out = o.out;
    fs::create_directories(out);
    write_text(out / "config.resolved.toml", to_toml(c));
    spdlog::info("datagen: split {} ({} flux, {} ICs), {} trajectories, N_x={} N_t={}", m.split, to_string(m.equation),
                 to_string(m.ic_family), m.n_coeffs * m.n_init, m.n_x, m.n_t);
    const auto report = generate_split(m, out, o.jobs);
    spdlog::info("datagen: wrote {} trajectories to {} ({} ICs resampled)", report.trajectories, out.string(),
                 report.resampled);
    return 0;
}

/// Keeps the rows of an existing loss.csv up to `step`.
std::vector<std::string> loss_rows_upto(const fs::path& file, std::size_t step) {
    std::vector<std::string> rows;
    std::ifstream in(file);
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (std::stoull(line.substr(0, line.find(','))) > step) break;
        rows.push_back(line);
    }
    return rows;
}

int cmd_train(const Options& o) {
    RunConfig c = resolve_config(o);
    const fs::path out = o.out;
    const fs::path latest = out / "checkpoint";
    const Dataset data = Dataset::load(o.data);
    const auto& m = data.manifest();
    if (m.split != "train") spdlog::warn("train: dataset split is '{}', not 'train'", m.split);
    if (m.n_x != c.data.n_x || m.n_t != c.data.n_t) {
        throw ConfigError("train: config grid N_x=" + std::to_string(c.data.n_x) + " N_t=" + std::to_string(c.data.n_t) +
                          " does not match dataset N_x=" + std::to_string(m.n_x) + " N_t=" + std::to_string(m.n_t));
    }
    const GridInfo grid = grid_of(m);

    std::unique_ptr<HFluxNO> model;
    TrainState state;
    if (has_checkpoint(latest)) {
        if (!o.resume) {
            throw ConfigError("train: " + latest.string() + " already exists; pass --resume or choose another --out");
        }
        Checkpoint ck = load_checkpoint(latest);
        RunConfig previous = ck.config;
        previous.train.steps = c.train.steps;
        if (to_json(previous) != to_json(c)) {
            throw ConfigError("train: resolved config differs from the checkpoint's (only train.steps may change on resume)");
        }
        check_grid(ck.grid, m, "checkpoint");
        model = std::move(ck.model);
        state = std::move(ck.state);
        spdlog::info("train: resuming at step {}", state.step);
    } else {
        model = std::make_unique<HFluxNO>(c.model, m.n_x, m.n_q, m.dt, m.dx, c.seed);
        state = initial_train_state(c.train);
    }
    fs::create_directories(out);
    write_text(out / "config.resolved.toml", to_toml(c));

    const fs::path loss_file = out / "loss.csv";
    std::vector<std::string> kept;
    if (o.resume && fs::exists(loss_file)) kept = loss_rows_upto(loss_file, state.step);
    std::ofstream loss(loss_file, std::ios::trunc);
    loss << "step,lr,loss\n";
    for (const auto& r : kept) loss << r << "\n";

    spdlog::info("train: {} parameters, steps {}..{}, batch {}", model->params().numel(), state.step + 1, c.train.steps,
                 c.train.batch_size);
    const std::size_t every = std::max<std::size_t>(1, c.train.steps / 20);
    auto on_step = [&](const LossRecord& r) {
        loss << r.step << "," << fmt(r.lr) << "," << fmt(r.loss) << "\n";
        if (r.step % every == 0 || r.step == c.train.steps) {
            loss.flush();
            spdlog::info("step {:>6}  lr {:.3e}  loss {:.6e}", r.step, r.lr, r.loss);
        }
    };
    auto on_checkpoint = [&](const TrainState& s) {
        loss.flush();
        char name[32];
        std::snprintf(name, sizeof name, "step_%06zu", s.step);
        save_checkpoint(out / "checkpoints" / name, *model, c, grid, s);
        save_checkpoint(latest, *model, c, grid, s);
        spdlog::info("train: checkpoint at step {}", s.step);
    };
    train(*model, data, c.train, state, on_step, on_checkpoint);
    loss.close();
    if (!loss) throw Error("train: failed writing " + loss_file.string());
    return 0;
}

fs::path checkpoint_dir(const fs::path& p) {
    if (has_checkpoint(p)) return p;
    if (has_checkpoint(p / "checkpoint")) return p / "checkpoint";
    throw FormatError("no checkpoint.json in " + p.string() + " or " + (p / "checkpoint").string());
}

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

int cmd_eval(const Options& o) {
    Checkpoint ck = load_checkpoint(checkpoint_dir(o.checkpoint));
    RunConfig c = ck.config;
    if (!o.mode.empty()) c.eval.rollout_mode = rollout_mode_from_string(o.mode);
    if (!o.aggregation.empty()) c.eval.aggregation = o.aggregation;
    c.validate();
    const Dataset data = Dataset::load(o.data);
    check_grid(ck.grid, data.manifest(), "checkpoint grid");
    if (data.manifest().n_t <= c.model.k) {
        throw ConfigError("eval: dataset N_t=" + std::to_string(data.manifest().n_t) + " leaves no target after k=" +
                          std::to_string(c.model.k) + " context snapshots");
    }

    const Protocol protocol = Protocol::parse(o.protocol);
    const Aggregation agg = aggregation_from_string(c.eval.aggregation);
    const fs::path out = o.out;
    fs::create_directories(out);
    write_text(out / "config.resolved.toml", to_toml(c));

    spdlog::info("eval: {} on split {} ({} trajectories), mode {}", protocol.name(), data.manifest().split,
                 data.trajectories(), to_string(c.eval.rollout_mode));
    const ModelPredictor model(*ck.model, c.eval.rollout_mode);
    const EvalReport report = evaluate(model, data, c.model.k, protocol, agg, o.jobs);
    const EvalReport identity = evaluate(IdentityPredictor{}, data, c.model.k, protocol, agg, o.jobs);

    json metrics = metrics_json(report);
    metrics["rollout_mode"] = to_string(c.eval.rollout_mode);
    metrics["identity_baseline"] = {{"rel_l2", summary_json(identity.rel_l2)},
                                    {"rel_linf", summary_json(identity.rel_linf)}};
    metrics["checkpoint"] = {{"step", ck.state.step}, {"train_equation", ck.grid.equation}};
    metrics["data"] = {{"split", data.manifest().split},
                       {"equation", to_string(data.manifest().equation)},
                       {"ic_family", to_string(data.manifest().ic_family)},
                       {"n_x", data.manifest().n_x},
                       {"n_t", data.manifest().n_t}};
    write_text(out / "metrics.json", metrics.dump(2) + "\n");
    write_text(out / "sample.json", sample_json(report).dump() + "\n");
    spdlog::info("eval: rel_l2 {:.4e} +- {:.2e} (identity {:.4e}), rel_linf {:.4e}, failed {}", report.rel_l2.mean,
                 report.rel_l2.std, identity.rel_l2.mean, report.rel_linf.mean, report.failed);
    return 0;
}

int cmd_export_plot(const Options& o) {
    const fs::path in = o.eval_dir;
    const fs::path out = o.out;
    std::string csv, svg;
    if (o.kind == "error_curve") {
        const json metrics = read_json(in / "metrics.json");
        csv = error_curve_csv(metrics);
        if (!o.no_svg) svg = error_curve_svg(metrics);
    } else {
        const json sample = read_json(in / "sample.json");
        csv = heatmap_csv(sample);
        if (!o.no_svg) svg = heatmap_svg(sample);
    }
    fs::create_directories(out);
    if (fs::exists(in / "config.resolved.toml")) {
        fs::copy_file(in / "config.resolved.toml", out / "config.resolved.toml", fs::copy_options::overwrite_existing);
    }
    write_text(out / (o.kind + ".csv"), csv);
    if (!o.no_svg) write_text(out / (o.kind + ".svg"), svg);
    spdlog::info("export-plot: wrote {}", (out / (o.kind + ".csv")).string());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_st("fluxlab");
    logger->set_pattern("[%H:%M:%S] %v");
    spdlog::set_default_logger(logger);

    CLI::App app{"fluxlab: context-conditioned finite-volume flux operators"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--jobs,-j", o.jobs, "Worker threads for datagen and eval")->check(CLI::PositiveNumber);

    auto* datagen = app.add_subcommand("datagen", "Generate a dataset split");
    datagen->add_option("--config", o.config, "TOML run config")->check(CLI::ExistingFile);
    datagen->add_option("--split", o.split, "Split name")->required()->check(CLI::IsMember(split_names()));
    datagen->add_option("--out", o.out, "Output directory")->required();
    datagen->add_option("--seed", o.seed, "Global seed (overrides FLUXLAB_SEED and the config)");

    auto* train = app.add_subcommand("train", "Train on a dataset split");
    train->add_option("--config", o.config, "TOML run config")->check(CLI::ExistingFile);
    train->add_option("--data", o.data, "Training split directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", o.out, "Run directory")->required();
    train->add_option("--steps", o.steps, "Total gradient steps (overrides the config)");
    train->add_option("--seed", o.seed, "Global seed (overrides FLUXLAB_SEED and the config)");
    train->add_flag("--resume", o.resume, "Continue from <out>/checkpoint");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    eval->add_option("--checkpoint", o.checkpoint, "Checkpoint or run directory")->required();
    eval->add_option("--data", o.data, "Split directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--protocol", o.protocol, "single_step | rollout[:N] | long_time")
        ->check(CLI::Validator(
            [](std::string& s) {
                try {
                    Protocol::parse(s);
                } catch (const Error& e) {
                    return std::string(e.what());
                }
                return std::string();
            },
            "PROTOCOL"));
    eval->add_option("--out", o.out, "Output directory")->required();
    eval->add_option("--mode", o.mode, "Rollout mode")->check(CLI::IsMember({"refresh", "frozen"}));
    eval->add_option("--aggregation", o.aggregation, "Metric aggregation")
        ->check(CLI::IsMember({"per_time", "full_grid"}));

    auto* plot = app.add_subcommand("export-plot", "Export plot data from an eval directory");
    plot->add_option("--eval-dir", o.eval_dir, "Eval output directory")->required()->check(CLI::ExistingDirectory);
    plot->add_option("--kind", o.kind, "Plot kind")->required()->check(CLI::IsMember({"error_curve", "trajectory_heatmap"}));
    plot->add_option("--out", o.out, "Output directory")->required();
    plot->add_flag("--no-svg", o.no_svg, "Skip the SVG rendering");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (datagen->parsed()) return cmd_datagen(o);
        if (train->parsed()) return cmd_train(o);
        if (eval->parsed()) return cmd_eval(o);
        if (plot->parsed()) return cmd_export_plot(o);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 2;
}
