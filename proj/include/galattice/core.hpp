#pragma once

#include <random>
#include <vector>

#include "galattice/attention.hpp"
#include "galattice/ga.hpp"
#include "galattice/point_cloud.hpp"

namespace galattice::net {

/// Adds the type embedding table and N blocks of (equivariant, invariant)
/// attention plus value-channel normalization, all under the "core." prefix.
void init_core(ParameterStore& store, const NetConfig& cfg, std::mt19937_64& rng);

struct CoreNodes {
    NodeId values;        // [k, width]
    NodeId multivectors;  // [k, 8]
};

/// Each block: rescale multivectors by 1 / max(1, norm); multivectors +=
/// equivariant attention; values = layer_norm(values + invariant attention).
CoreNodes build_core(Graph& g, const ParameterStore& store, const NetConfig& cfg, NodeId bonds, NodeId types_one_hot,
                     std::size_t k);

struct CoreOutput {
    Tensor values;
    std::vector<ga::Multivector> multivectors;
};

/// Evaluates the core on one cloud.
CoreOutput core_forward(const PointCloud& cloud, const ParameterStore& store, const NetConfig& cfg);

}  // namespace galattice::net
