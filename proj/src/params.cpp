#include "galattice/params.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace galattice {

std::size_t ParameterStore::add(std::string name, Tensor value) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    const std::size_t i = entries_.size();
    index_.emplace(name, i);
    entries_.push_back({std::move(name), std::move(value), true});
    return i;
}

std::optional<std::size_t> ParameterStore::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t ParameterStore::index(std::string_view name) const {
    auto i = find(name);
    if (!i) throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
    return *i;
}

std::size_t ParameterStore::total_values() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
}

std::size_t ParameterStore::set_trainable_prefix(std::string_view prefix, bool on) {
    std::size_t n = 0;
    for (auto& e : entries_)
        if (std::string_view(e.name).substr(0, prefix.size()) == prefix) {
            e.trainable = on;
            ++n;
        }
    return n;
}

std::vector<double> ParameterStore::flatten() const {
    std::vector<double> out;
    out.reserve(total_values());
    for (const auto& e : entries_) out.insert(out.end(), e.value.storage().begin(), e.value.storage().end());
    return out;
}

std::vector<std::uint8_t> ParameterStore::bytes(std::string_view prefix) const {
    std::vector<std::uint8_t> out;
    for (const auto& e : entries_) {
        if (std::string_view(e.name).substr(0, prefix.size()) != prefix) continue;
        const auto* p = reinterpret_cast<const std::uint8_t*>(e.value.data());
        out.insert(out.end(), p, p + e.value.size() * sizeof(double));
    }
    return out;
}

Gradients::Gradients(const ParameterStore& store) {
    grads_.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) grads_.emplace_back(store.value(i).shape());
}

void Gradients::zero() {
    for (auto& g : grads_) g.fill(0.0);
}

Gradients& Gradients::operator+=(const Gradients& other) {
    if (other.grads_.size() != grads_.size()) throw std::invalid_argument("gradient buffers have different layouts");
    for (std::size_t i = 0; i < grads_.size(); ++i) {
        auto& a = grads_[i].storage();
        const auto& b = other.grads_[i].storage();
        if (a.size() != b.size()) throw std::invalid_argument("gradient buffers have different layouts");
        for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
    }
    return *this;
}

void Gradients::scale(double s) {
    for (auto& g : grads_)
        for (double& x : g.storage()) x *= s;
}

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& x : t.storage()) x = dist(rng);
}

}  // namespace galattice
