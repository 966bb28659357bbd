#include "fluxlab/params.hpp"

#include <algorithm>

#include "fluxlab/error.hpp"

namespace fluxlab {

Tensor& ParamSet::add(std::string name, Tensor t) {
    t.set_requires_grad(true);
    entries_.emplace_back(std::move(name), std::move(t));
    return entries_.back().second;
}

void ParamSet::append(const std::string& prefix, const ParamSet& other) {
    for (const auto& [n, t] : other.entries_) entries_.emplace_back(prefix + n, t);
}

std::size_t ParamSet::numel() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.numel();
    return n;
}

const Tensor& ParamSet::get(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.first == name) return e.second;
    }
    throw Error("no parameter named '" + name + "'");
}

std::vector<double> ParamSet::flatten() const {
    std::vector<double> flat;
    flat.reserve(numel());
    for (const auto& e : entries_) {
        const auto d = e.second.data();
        flat.insert(flat.end(), d.begin(), d.end());
    }
    return flat;
}

void ParamSet::assign(const std::vector<double>& flat) {
    if (flat.size() != numel()) {
        throw ShapeError("parameter vector has " + std::to_string(flat.size()) + " values, expected " +
                         std::to_string(numel()));
    }
    std::size_t offset = 0;
    for (auto& e : entries_) {
        auto d = e.second.mutable_data();
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), d.size(), d.begin());
        offset += d.size();
    }
}

void ParamSet::zero_grad() {
    for (auto& e : entries_) e.second.zero_grad();
}

std::vector<double> ParamSet::flat_grad() const {
    std::vector<double> g;
    g.reserve(numel());
    for (const auto& e : entries_) {
        if (e.second.has_grad()) {
            const auto gr = e.second.grad();
            g.insert(g.end(), gr.begin(), gr.end());
        } else {
            g.insert(g.end(), e.second.numel(), 0.0);
        }
    }
    return g;
}

Tensor normal_param(Shape shape, double std, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, std);
    std::vector<double> v(numel(shape));
    for (double& x : v) x = std > 0.0 ? normal(rng) : 0.0;
    return Tensor::from_data(std::move(shape), std::move(v), true);
}

} // namespace fluxlab
