#include "galattice/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace galattice {

void validate_cloud(const PointCloud& cloud, std::size_t min_bonds) {
    if (cloud.bonds.size() < min_bonds)
        throw std::invalid_argument("point cloud has " + std::to_string(cloud.bonds.size()) + " bonds, need at least " +
                                    std::to_string(min_bonds));
    if (cloud.types.size() != cloud.bonds.size())
        throw std::invalid_argument("point cloud has " + std::to_string(cloud.types.size()) + " type indices for " +
                                    std::to_string(cloud.bonds.size()) + " bonds");
    for (const Vec3& b : cloud.bonds)
        if (!b.allFinite()) throw std::invalid_argument("point cloud contains a non-finite bond");
}

Tensor bonds_as_multivectors(const PointCloud& cloud) {
    Tensor t({cloud.size(), ga::kComponents});
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (int c = 0; c < 3; ++c) t[i * ga::kComponents + 1 + c] = cloud.bonds[i][c];
    return t;
}

Tensor types_one_hot(const PointCloud& cloud, std::size_t n_types) {
    Tensor t({cloud.size(), n_types});
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const int ty = cloud.types.at(i);
        if (ty < 0 || static_cast<std::size_t>(ty) >= n_types)
            throw std::invalid_argument("type index " + std::to_string(ty) + " outside embedding table of " +
                                        std::to_string(n_types));
        t[i * n_types + static_cast<std::size_t>(ty)] = 1.0;
    }
    return t;
}

Tensor bonds_as_matrix(const std::vector<Vec3>& bonds) {
    Tensor t({bonds.size(), 3});
    for (std::size_t i = 0; i < bonds.size(); ++i)
        for (int c = 0; c < 3; ++c) t[i * 3 + c] = bonds[i][c];
    return t;
}

namespace net {

namespace {
std::string block_prefix(std::size_t b) { return "core.block" + std::to_string(b); }
}  // namespace

void init_core(ParameterStore& store, const NetConfig& cfg, std::mt19937_64& rng) {
    Tensor table({cfg.n_types, cfg.width});
    glorot_uniform(table, cfg.n_types, cfg.width, rng);
    store.add("core.type_embedding", std::move(table));
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        const std::string p = block_prefix(b);
        init_attention(store, p + ".equivariant", cfg, true, rng);
        init_attention(store, p + ".invariant", cfg, false, rng);
        store.add(p + ".norm.gain", Tensor({cfg.width}, 1.0));
        store.add(p + ".norm.bias", Shape{cfg.width});
    }
}

CoreNodes build_core(Graph& g, const ParameterStore& store, const NetConfig& cfg, NodeId bonds, NodeId types_one_hot,
                     std::size_t k) {
    NodeId values = autodiff::dense(g, types_one_hot, g.parameter(store, "core.type_embedding"), autodiff::kNoNode,
                                    "core.embed");
    NodeId mv = bonds;
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        const std::string p = block_prefix(b);
        mv = clamp_norm(g, mv);
        mv = autodiff::add(g, mv, attention_equivariant(g, store, p + ".equivariant", mv, values, k, false),
                           p + ".residual.multivectors");
        const NodeId inv = attention_invariant(g, store, p + ".invariant", mv, values, k, false);
        values = autodiff::layer_norm(g, autodiff::add(g, values, inv, p + ".residual.values"),
                                      g.parameter(store, p + ".norm.gain"), g.parameter(store, p + ".norm.bias"));
    }
    return {values, mv};
}

CoreOutput core_forward(const PointCloud& cloud, const ParameterStore& store, const NetConfig& cfg) {
    validate_cloud(cloud, 1);
    const std::size_t k = cloud.size();
    Graph g;
    const NodeId bonds = g.input("bonds", {k, ga::kComponents});
    const NodeId types = g.input("types", {k, cfg.n_types});
    const CoreNodes out = build_core(g, store, cfg, bonds, types, k);
    g.bind(store);
    g.forward({{"bonds", bonds_as_multivectors(cloud)}, {"types", types_one_hot(cloud, cfg.n_types)}});
    CoreOutput result;
    result.values = g.value(out.values);
    const Tensor& mv = g.value(out.multivectors);
    result.multivectors.resize(k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t c = 0; c < ga::kComponents; ++c) result.multivectors[i][c] = mv[i * ga::kComponents + c];
    return result;
}

}  // namespace net
}  // namespace galattice
