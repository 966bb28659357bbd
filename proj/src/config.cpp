#include "fluxlab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "fluxlab/dataset.hpp"
#include "fluxlab/error.hpp"

namespace fluxlab {

using nlohmann::json;

void RunConfig::validate() const {
    if (data.n_coeffs == 0 || data.n_init == 0 || data.holdout_n_coeffs == 0 || data.holdout_n_init == 0) {
        throw ConfigError("data: trajectory counts must be positive");
    }
    if (data.n_x == 0 || data.n_t == 0) throw ConfigError("data: n_x and n_t must be positive");
    if (data.equation == FluxKind::sine) throw ConfigError("data: sine flux is an out-of-distribution split only");
    model.encoder.validate();
    model.fluxno.validate();
    if (model.k == 0 || model.k >= data.n_t) throw ConfigError("model: need 1 <= k < n_t");
    if (data.n_x % model.encoder.patch_size != 0) throw ConfigError("encoder: n_x must be divisible by patch_size");
    model.fluxno.validate_grid(data.n_x);
    train.validate();
    if (eval.aggregation != "per_time" && eval.aggregation != "full_grid") {
        throw ConfigError("eval: aggregation must be per_time or full_grid");
    }
}

json to_json(const RunConfig& c) {
    const auto& o = c.train.optimizer;
    return json{
        {"seed", c.seed},
        {"data",
         {{"equation", to_string(c.data.equation)},
          {"n_coeffs", c.data.n_coeffs},
          {"n_init", c.data.n_init},
          {"holdout_n_coeffs", c.data.holdout_n_coeffs},
          {"holdout_n_init", c.data.holdout_n_init},
          {"n_x", c.data.n_x},
          {"n_t", c.data.n_t}}},
        {"encoder",
         {{"patch_size", c.model.encoder.patch_size},
          {"e", c.model.encoder.e},
          {"layers", c.model.encoder.layers},
          {"heads", c.model.encoder.heads},
          {"w_t", c.model.encoder.w_t},
          {"coord_channel", c.model.encoder.coord_channel}}},
        {"fluxno",
         {{"s", c.model.fluxno.s},
          {"w", c.model.fluxno.w},
          {"layers", c.model.fluxno.layers},
          {"modes", c.model.fluxno.modes},
          {"coord_channel", c.model.fluxno.coord_channel}}},
        {"model", {{"k", c.model.k}}},
        {"train",
         {{"steps", c.train.steps},
          {"batch_size", c.train.batch_size},
          {"checkpoint_every", c.train.checkpoint_every},
          {"peak_lr", o.peak_lr},
          {"floor_lr", o.floor_lr},
          {"warmup_fraction", o.warmup_fraction},
          {"weight_decay", o.weight_decay},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"eps", o.eps},
          {"clip_norm", o.clip_norm}}},
        {"eval", {{"rollout_mode", to_string(c.eval.rollout_mode)}, {"aggregation", c.eval.aggregation}}},
    };
}

namespace {

/// Reads the keys of one table, rejecting anything it does not know.
class Reader {
public:
    Reader(const json& table, std::string path) : table_(table), path_(std::move(path)) {
        if (!table_.is_object()) throw ConfigError("config: '" + path_ + "' must be a table");
    }
    /// Call after the last get(): rejects keys nobody asked for.
    void done() const {
        for (const auto& [key, value] : table_.items()) {
            if (!seen_.count(key)) throw ConfigError("config: unknown key '" + qualified(key) + "'");
        }
    }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        const auto it = table_.find(key);
        if (it == table_.end()) return;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw ConfigError("");
                out = it->template get<bool>();
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) throw ConfigError("");
                out = it->template get<std::string>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer() || it->template get<long long>() < 0) {
                    throw ConfigError("");
                }
                out = it->template get<T>();
            } else {
                if (!it->is_number()) throw ConfigError("");
                out = it->template get<T>();
            }
        } catch (const std::exception&) {
            throw ConfigError("config: '" + qualified(key) + "' has the wrong type (" + std::string(it->type_name()) + ")");
        }
    }

    const json* table(const std::string& key) {
        seen_.insert(key);
        const auto it = table_.find(key);
        return it == table_.end() ? nullptr : &*it;
    }

private:
    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& table_;
    std::string path_;
    std::set<std::string> seen_;
};

json toml_to_json(const toml::node& node) {
    if (const auto* t = node.as_table()) {
        json j = json::object();
        for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
        return j;
    }
    if (const auto* a = node.as_array()) {
        json j = json::array();
        for (const auto& v : *a) j.push_back(toml_to_json(v));
        return j;
    }
    if (const auto* v = node.as_integer()) return v->get();
    if (const auto* v = node.as_floating_point()) return v->get();
    if (const auto* v = node.as_boolean()) return v->get();
    if (const auto* v = node.as_string()) return v->get();
    throw ConfigError("config: dates and times are not supported");
}

toml::table json_to_toml(const json& j) {
    toml::table t;
    for (const auto& [k, v] : j.items()) {
        if (v.is_object()) {
            t.insert(k, json_to_toml(v));
        } else if (v.is_boolean()) {
            t.insert(k, v.get<bool>());
        } else if (v.is_number_integer()) {
            t.insert(k, v.get<std::int64_t>());
        } else if (v.is_number_float()) {
            t.insert(k, v.get<double>());
        } else if (v.is_string()) {
            t.insert(k, v.get<std::string>());
        }
    }
    return t;
}

} // namespace

RunConfig config_from_json(const json& j) {
    RunConfig c;
    Reader root(j, "");
    root.get("seed", c.seed);
    if (const json* t = root.table("data")) {
        Reader r(*t, "data");
        std::string eq = to_string(c.data.equation);
        r.get("equation", eq);
        c.data.equation = flux_kind_from_string(eq);
        r.get("n_coeffs", c.data.n_coeffs);
        r.get("n_init", c.data.n_init);
        r.get("holdout_n_coeffs", c.data.holdout_n_coeffs);
        r.get("holdout_n_init", c.data.holdout_n_init);
        r.get("n_x", c.data.n_x);
        r.get("n_t", c.data.n_t);
        r.done();
    }
    if (const json* t = root.table("encoder")) {
        Reader r(*t, "encoder");
        auto& e = c.model.encoder;
        r.get("patch_size", e.patch_size);
        r.get("e", e.e);
        r.get("layers", e.layers);
        r.get("heads", e.heads);
        r.get("w_t", e.w_t);
        r.get("coord_channel", e.coord_channel);
        r.done();
    }
    if (const json* t = root.table("fluxno")) {
        Reader r(*t, "fluxno");
        auto& f = c.model.fluxno;
        r.get("s", f.s);
        r.get("w", f.w);
        r.get("layers", f.layers);
        r.get("modes", f.modes);
        r.get("coord_channel", f.coord_channel);
        r.done();
    }
    if (const json* t = root.table("model")) {
        Reader r(*t, "model");
        r.get("k", c.model.k);
        r.done();
    }
    if (const json* t = root.table("train")) {
        Reader r(*t, "train");
        auto& o = c.train.optimizer;
        r.get("steps", c.train.steps);
        r.get("batch_size", c.train.batch_size);
        r.get("checkpoint_every", c.train.checkpoint_every);
        r.get("peak_lr", o.peak_lr);
        r.get("floor_lr", o.floor_lr);
        r.get("warmup_fraction", o.warmup_fraction);
        r.get("weight_decay", o.weight_decay);
        r.get("beta1", o.beta1);
        r.get("beta2", o.beta2);
        r.get("eps", o.eps);
        r.get("clip_norm", o.clip_norm);
        r.done();
    }
    if (const json* t = root.table("eval")) {
        Reader r(*t, "eval");
        std::string mode = to_string(c.eval.rollout_mode);
        r.get("rollout_mode", mode);
        c.eval.rollout_mode = rollout_mode_from_string(mode);
        r.get("aggregation", c.eval.aggregation);
        r.done();
    }
    root.done();
    c.train.seed = c.seed;
    c.validate();
    return c;
}

RunConfig parse_config(const std::string& toml_text, const std::string& source) {
    toml::table table;
    try {
        table = toml::parse(toml_text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << e;
        throw ConfigError("config: " + os.str());
    }
    return config_from_json(toml_to_json(table));
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("config: cannot read " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), file.string());
}

std::string to_toml(const RunConfig& config) {
    std::ostringstream os;
    os << json_to_toml(to_json(config)) << "\n";
    return os.str();
}

std::optional<std::uint64_t> seed_from_env() {
    const char* v = std::getenv("FLUXLAB_SEED");
    if (!v || !*v) return std::nullopt;
    const std::string s(v);
    if (s.find_first_not_of("0123456789") != std::string::npos || s.size() > 19) {
        throw ConfigError("FLUXLAB_SEED must be a non-negative integer, got '" + s + "'");
    }
    return std::stoull(s);
}

} // namespace fluxlab
