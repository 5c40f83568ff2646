#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "galattice/tensor.hpp"

namespace galattice {

/// Named, ordered collection of parameter tensors. Insertion order is the flat
/// order used for checkpoints and optimizer state.
class ParameterStore {
public:
    std::size_t add(std::string name, Tensor value);
    std::size_t add(std::string name, Shape shape) { return add(std::move(name), Tensor(std::move(shape))); }

    std::optional<std::size_t> find(std::string_view name) const;
    /// Throws std::out_of_range naming the parameter if absent.
    std::size_t index(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name).has_value(); }

    std::size_t size() const { return entries_.size(); }
    std::size_t total_values() const;

    const std::string& name(std::size_t i) const { return entries_.at(i).name; }
    Tensor& value(std::size_t i) { return entries_.at(i).value; }
    const Tensor& value(std::size_t i) const { return entries_.at(i).value; }
    Tensor& value(std::string_view name) { return value(index(name)); }
    const Tensor& value(std::string_view name) const { return value(index(name)); }

    bool trainable(std::size_t i) const { return entries_.at(i).trainable; }
    void set_trainable(std::size_t i, bool on) { entries_.at(i).trainable = on; }
    /// Applies to every parameter whose name starts with `prefix`; returns the count touched.
    std::size_t set_trainable_prefix(std::string_view prefix, bool on);

    std::vector<double> flatten() const;
    /// Flat bytes of every value, for bit-exact comparisons.
    std::vector<std::uint8_t> bytes(std::string_view prefix = {}) const;

private:
    struct Entry {
        std::string name;
        Tensor value;
        bool trainable = true;
    };
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Gradient buffers aligned one-to-one with a ParameterStore.
class Gradients {
public:
    Gradients() = default;
    explicit Gradients(const ParameterStore& store);

    std::size_t size() const { return grads_.size(); }
    Tensor& operator[](std::size_t i) { return grads_[i]; }
    const Tensor& operator[](std::size_t i) const { return grads_[i]; }

    void zero();
    Gradients& operator+=(const Gradients& other);
    void scale(double s);

private:
    std::vector<Tensor> grads_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace galattice
