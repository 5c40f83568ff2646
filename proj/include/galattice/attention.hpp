#pragma once

// Geometric algebra attention layers.
//
// For bonds r_i (multivectors) with invariant values v_i every ordered pair
// (i, j), self-pairs included, contributes
//   p_ij = r_i r_j
//   q_ij = invariants(r_i, r_j, p_ij)                      (12 entries)
//   v_ij = J(V(q_ij), M(v_i, v_j))
//   w_ij = softmax(S(v_ij)) over j, or over (i, j) when reducing
// and the layers emit
//   invariant:   v_i' = sum_j w_ij v_ij
//   equivariant: r_i' = sum_j w_ij R(v_ij) (a0 r_i + a1 r_j + a2 p_ij)
// Reducing layers sum over both indices and emit a single row.

#include <random>
#include <string>

#include "galattice/autodiff.hpp"
#include "galattice/params.hpp"

namespace galattice::net {

using autodiff::Graph;
using autodiff::NodeId;

struct NetConfig {
    std::size_t width = 32;   // invariant channel
    std::size_t hidden = 64;  // MLP hidden layers
    std::size_t blocks = 3;
    std::size_t n_types = 4;
};

// Geometric algebra graph operators; multivector tensors are [n, 8].

/// [k, 8] -> [k*k, 8] with row i*k + j holding r_i r_j.
NodeId pair_products(Graph& g, NodeId multivectors);
/// [n, 8] -> [n, 4]: scalar, |vector|, |bivector|, trivector.
NodeId multivector_invariants(Graph& g, NodeId multivectors);
/// Divides each row by max(1, row norm).
NodeId clamp_norm(Graph& g, NodeId multivectors);
/// alpha[0] a + alpha[1] b + alpha[2] c for alpha of shape [3].
NodeId combine3(Graph& g, NodeId alpha, NodeId a, NodeId b, NodeId c);
/// [n, 3] -> [n, 8] pure vectors.
NodeId vectors_to_multivectors(Graph& g, NodeId vectors);
/// [n, 8] -> [n, 3].
NodeId vector_part(Graph& g, NodeId multivectors);

/// Two-layer MLP x -> relu(x W0 + b0) W1 + b1 with parameters `<prefix>.w0` etc.
void init_mlp(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out,
              std::mt19937_64& rng);
NodeId mlp(Graph& g, const ParameterStore& store, const std::string& prefix, NodeId x);

void init_attention(ParameterStore& store, const std::string& prefix, const NetConfig& cfg, bool equivariant,
                    std::mt19937_64& rng);

/// Returns [k, width] or, when reducing, [1, width].
NodeId attention_invariant(Graph& g, const ParameterStore& store, const std::string& prefix, NodeId bonds,
                           NodeId values, std::size_t k, bool reduce);
/// Returns [k, 8] or, when reducing, [1, 8].
NodeId attention_equivariant(Graph& g, const ParameterStore& store, const std::string& prefix, NodeId bonds,
                             NodeId values, std::size_t k, bool reduce);

}  // namespace galattice::net
