#include "fluxlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "fluxlab/error.hpp"

namespace fluxlab {

using nlohmann::json;

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json nums(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

json summary(const Summary& s) { return {{"mean", num(s.mean)}, {"std", num(s.std)}}; }

double as_double(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace

json metrics_json(const EvalReport& r) {
    json curve = json::object();
    if (!r.curve_time.empty()) {
        std::vector<double> l2m, l2s, lim, lis;
        for (std::size_t s = 0; s < r.curve_time.size(); ++s) {
            l2m.push_back(r.l2_curve[s].mean);
            l2s.push_back(r.l2_curve[s].std);
            lim.push_back(r.linf_curve[s].mean);
            lis.push_back(r.linf_curve[s].std);
        }
        curve = {{"time", nums(r.curve_time)},
                 {"rel_l2_mean", nums(l2m)},
                 {"rel_l2_std", nums(l2s)},
                 {"rel_linf_mean", nums(lim)},
                 {"rel_linf_std", nums(lis)}};
    }
    return {
        {"protocol", r.protocol},
        {"aggregation", to_string(r.aggregation)},
        {"k", r.k},
        {"trajectories", r.trajectories},
        {"failed_rollouts", r.failed},
        {"rel_l2", summary(r.rel_l2)},
        {"rel_linf", summary(r.rel_linf)},
        {"per_trajectory", {{"rel_l2", nums(r.per_trajectory_l2)}, {"rel_linf", nums(r.per_trajectory_linf)}}},
        {"curve", curve},
        {"max_mass_drift", num(r.max_mass_drift)},
    };
}

json sample_json(const EvalReport& r) {
    return {{"n_t", r.sample_n_t},          {"n_x", r.sample_n_x},
            {"d", r.sample_d},              {"dt", r.dt},
            {"k", r.k},                     {"protocol", r.protocol},
            {"truth", nums(r.sample_truth)}, {"prediction", nums(r.sample_prediction)}};
}

std::string error_curve_csv(const json& metrics) {
    const auto& c = metrics.at("curve");
    if (!c.contains("time")) {
        throw ConfigError("protocol '" + metrics.at("protocol").get<std::string>() + "' has no error curve; evaluate a rollout");
    }
    std::ostringstream os;
    os << "time,mean,std\n";
    for (std::size_t s = 0; s < c.at("time").size(); ++s) {
        os << fmt(as_double(c["time"][s])) << "," << fmt(as_double(c["rel_l2_mean"][s])) << ","
           << fmt(as_double(c["rel_l2_std"][s])) << "\n";
    }
    return os.str();
}

std::string heatmap_csv(const json& sample) {
    const std::size_t n_t = sample.at("n_t"), n_x = sample.at("n_x"), d = sample.at("d");
    const double dt = sample.at("dt");
    const auto& truth = sample.at("truth");
    const auto& pred = sample.at("prediction");
    if (truth.size() != n_t * n_x * d || pred.size() != truth.size()) throw FormatError("sample: array sizes do not match n_t*n_x*d");
    std::ostringstream os;
    os << "t,x" << (d > 1 ? ",channel" : "") << ",value,prediction,abs_error\n";
    for (std::size_t t = 0; t < n_t; ++t)
        for (std::size_t x = 0; x < n_x; ++x)
            for (std::size_t c = 0; c < d; ++c) {
                const std::size_t j = (t * n_x + x) * d + c;
                const double v = as_double(truth[j]), p = as_double(pred[j]);
                os << fmt(static_cast<double>(t) * dt) << "," << fmt((static_cast<double>(x) + 0.5) / static_cast<double>(n_x));
                if (d > 1) os << "," << c;
                os << "," << fmt(v) << "," << fmt(p) << "," << fmt(std::abs(p - v)) << "\n";
            }
    return os.str();
}

namespace {

constexpr double kW = 640, kH = 400, kPad = 60;

std::string svg_header(double w, double h) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
       << " " << h << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return os.str();
}

/// Blue-white-red for signed values, white-to-black for magnitudes.
std::string colour(double v, double lo, double hi, bool diverging) {
    if (!std::isfinite(v)) return "#ff00ff";
    double s = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    s = std::clamp(s, 0.0, 1.0);
    int r, g, b;
    if (diverging) {
        if (s < 0.5) {
            const double a = s / 0.5;
            r = static_cast<int>(255 * a);
            g = static_cast<int>(255 * a);
            b = 255;
        } else {
            const double a = (1.0 - s) / 0.5;
            r = 255;
            g = static_cast<int>(255 * a);
            b = static_cast<int>(255 * a);
        }
    } else {
        r = g = b = static_cast<int>(255 * (1.0 - s));
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

} // namespace

std::string error_curve_svg(const json& metrics) {
    const auto& c = metrics.at("curve");
    if (!c.contains("time")) throw ConfigError("metrics carry no error curve");
    std::vector<double> t, m, s;
    for (std::size_t j = 0; j < c["time"].size(); ++j) {
        t.push_back(as_double(c["time"][j]));
        m.push_back(as_double(c["rel_l2_mean"][j]));
        s.push_back(as_double(c["rel_l2_std"][j]));
    }
    double y_max = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j) {
        if (std::isfinite(m[j] + s[j])) y_max = std::max(y_max, m[j] + s[j]);
    }
    if (y_max <= 0.0) y_max = 1.0;
    const double t0 = t.front(), t1 = t.size() > 1 ? t.back() : t.front() + 1.0;
    auto px = [&](double v) { return kPad + (v - t0) / (t1 - t0) * (kW - 2 * kPad); };
    auto py = [&](double v) { return kH - kPad - v / y_max * (kH - 2 * kPad); };

    std::ostringstream os;
    os << svg_header(kW, kH);
    os << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\"" << kH - kPad
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
       << "\" stroke=\"black\"/>\n";
    os << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" points=\"";
    for (std::size_t j = 0; j < t.size(); ++j) os << px(t[j]) << "," << py(std::max(0.0, m[j] + s[j])) << " ";
    for (std::size_t j = t.size(); j-- > 0;) os << px(t[j]) << "," << py(std::max(0.0, m[j] - s[j])) << " ";
    os << "\"/>\n<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
    for (std::size_t j = 0; j < t.size(); ++j) {
        if (std::isfinite(m[j])) os << px(t[j]) << "," << py(m[j]) << " ";
    }
    os << "\"/>\n";
    os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\" font-size=\"14\">time</text>\n";
    os << "<text x=\"15\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 15 "
       << kH / 2 << ")\">relative l2 error</text>\n";
    os << "<text x=\"" << kPad - 5 << "\" y=\"" << kPad + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(y_max)
       << "</text>\n";
    os << "<text x=\"" << kPad << "\" y=\"" << kH - kPad + 16 << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(t0)
       << "</text>\n";
    os << "<text x=\"" << kW - kPad << "\" y=\"" << kH - kPad + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << fmt(t1) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::string heatmap_svg(const json& sample) {
    const std::size_t n_t = sample.at("n_t"), n_x = sample.at("n_x"), d = sample.at("d");
    const auto& truth = sample.at("truth");
    const auto& pred = sample.at("prediction");
    // channel 0 only
    std::vector<double> tv, pv, ev;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, emax = 0.0;
    for (std::size_t j = 0; j < n_t * n_x; ++j) {
        const double a = as_double(truth[j * d]), b = as_double(pred[j * d]);
        tv.push_back(a);
        pv.push_back(b);
        ev.push_back(std::abs(a - b));
        lo = std::min(lo, a);
        hi = std::max(hi, a);
        if (std::isfinite(ev.back())) emax = std::max(emax, ev.back());
    }
    const double cell_w = std::max(1.0, 200.0 / static_cast<double>(n_x));
    const double cell_h = std::max(1.0, 300.0 / static_cast<double>(n_t));
    const double panel_w = cell_w * static_cast<double>(n_x), panel_h = cell_h * static_cast<double>(n_t);
    const double width = 3 * panel_w + 4 * 20, height = panel_h + 60;
    std::ostringstream os;
    os << svg_header(width, height);
    const char* titles[] = {"truth", "prediction", "abs error"};
    const std::vector<double>* data[] = {&tv, &pv, &ev};
    for (int p = 0; p < 3; ++p) {
        const double x0 = 20 + p * (panel_w + 20);
        os << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << titles[p]
           << "</text>\n<g shape-rendering=\"crispEdges\">\n";
        for (std::size_t t = 0; t < n_t; ++t)
            for (std::size_t x = 0; x < n_x; ++x) {
                const double v = (*data[p])[t * n_x + x];
                const std::string col = p < 2 ? colour(v, lo, hi, true) : colour(v, 0.0, emax, false);
                os << "<rect x=\"" << x0 + static_cast<double>(x) * cell_w << "\" y=\""
                   << 40 + static_cast<double>(t) * cell_h << "\" width=\"" << cell_w << "\" height=\"" << cell_h
                   << "\" fill=\"" << col << "\"/>\n";
            }
        os << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

json read_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw FormatError("cannot read " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(file.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw Error("cannot write " + file.string());
    out << text;
    if (!out) throw Error("write failed for " + file.string());
}

} // namespace fluxlab
