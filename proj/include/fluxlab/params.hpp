#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fluxlab/tensor.hpp"

namespace fluxlab {

/// Ordered collection of named trainable tensors. Order is fixed at
/// construction and defines the flat layout used by checkpoints and the
/// optimizer.
class ParamSet {
public:
    Tensor& add(std::string name, Tensor t);
    void append(const std::string& prefix, const ParamSet& other);

    std::size_t size() const { return entries_.size(); }
    std::size_t numel() const;
    const std::string& name(std::size_t i) const { return entries_[i].first; }
    Tensor& operator[](std::size_t i) { return entries_[i].second; }
    const Tensor& operator[](std::size_t i) const { return entries_[i].second; }
    const Tensor& get(const std::string& name) const;

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    std::vector<double> flatten() const;
    /// Overwrites values in place (handles stay valid).
    void assign(const std::vector<double>& flat);
    void zero_grad();
    std::vector<double> flat_grad() const;

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

/// N(0, std^2) entries, trainable.
Tensor normal_param(Shape shape, double std, std::mt19937_64& rng);

} // namespace fluxlab
