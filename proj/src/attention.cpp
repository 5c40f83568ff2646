#include "galattice/attention.hpp"

#include <cmath>

#include "galattice/ga.hpp"

namespace galattice::net {

namespace {

using autodiff::Op;
using autodiff::ShapeError;
constexpr std::size_t kMv = ga::kComponents;

void require_multivectors(const Shape& s, const char* what) {
    if (s.size() != 2 || s[1] != kMv) throw ShapeError(std::string(what) + ": expected [n, 8], got " + shape_string(s));
}

class PairProductsOp final : public Op {
public:
    std::string kind() const override { return "pair_products"; }
    Shape output_shape(std::span<const Shape> in) const override {
        require_multivectors(in[0], "pair_products");
        return {in[0][0] * in[0][0], kMv};
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const std::size_t k = in[0]->dim(0);
        const double* a = in[0]->data();
        double* y = out.data();
        std::fill(y, y + out.size(), 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                const double* ai = a + i * kMv;
                const double* aj = a + j * kMv;
                double* yij = y + (i * k + j) * kMv;
                for (std::size_t p = 0; p < kMv; ++p) {
                    if (ai[p] == 0.0) continue;
                    for (std::size_t q = 0; q < kMv; ++q)
                        yij[ga::kProduct.slot[p][q]] += ga::kProduct.sign[p][q] * ai[p] * aj[q];
                }
            }
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        const std::size_t k = in[0]->dim(0);
        const double* a = in[0]->data();
        double* ga_ = gin[0]->data();
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                const double* ai = a + i * kMv;
                const double* aj = a + j * kMv;
                const double* g = gout.data() + (i * k + j) * kMv;
                double* gi = ga_ + i * kMv;
                double* gj = ga_ + j * kMv;
                for (std::size_t p = 0; p < kMv; ++p)
                    for (std::size_t q = 0; q < kMv; ++q) {
                        const double s = ga::kProduct.sign[p][q] * g[ga::kProduct.slot[p][q]];
                        gi[p] += s * aj[q];
                        gj[q] += s * ai[p];
                    }
            }
    }
};

class InvariantsOp final : public Op {
public:
    std::string kind() const override { return "multivector_invariants"; }
    Shape output_shape(std::span<const Shape> in) const override {
        require_multivectors(in[0], "multivector_invariants");
        return {in[0][0], 4};
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const std::size_t n = in[0]->dim(0);
        for (std::size_t r = 0; r < n; ++r) {
            const double* a = in[0]->data() + r * kMv;
            double* y = out.data() + r * 4;
            y[0] = a[0];
            y[1] = std::sqrt(a[1] * a[1] + a[2] * a[2] + a[3] * a[3]);
            y[2] = std::sqrt(a[4] * a[4] + a[5] * a[5] + a[6] * a[6]);
            y[3] = a[7];
        }
    }
    void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        const std::size_t n = in[0]->dim(0);
        for (std::size_t r = 0; r < n; ++r) {
            const double* a = in[0]->data() + r * kMv;
            const double* y = out.data() + r * 4;
            const double* g = gout.data() + r * 4;
            double* gx = gin[0]->data() + r * kMv;
            gx[0] += g[0];
            gx[7] += g[3];
            // |x| has no derivative at 0; the zero subgradient is used there.
            if (y[1] > 0.0)
                for (std::size_t c = 1; c < 4; ++c) gx[c] += g[1] * a[c] / y[1];
            if (y[2] > 0.0)
                for (std::size_t c = 4; c < 7; ++c) gx[c] += g[2] * a[c] / y[2];
        }
    }
};

class ClampNormOp final : public Op {
public:
    std::string kind() const override { return "clamp_norm"; }
    Shape output_shape(std::span<const Shape> in) const override {
        require_multivectors(in[0], "clamp_norm");
        return in[0];
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const std::size_t n = in[0]->dim(0);
        norms_.resize(n);
        for (std::size_t r = 0; r < n; ++r) {
            const double* a = in[0]->data() + r * kMv;
            double s = 0.0;
            for (std::size_t c = 0; c < kMv; ++c) s += a[c] * a[c];
            norms_[r] = std::sqrt(s);
            const double f = 1.0 / std::max(1.0, norms_[r]);
            for (std::size_t c = 0; c < kMv; ++c) out[r * kMv + c] = f * a[c];
        }
    }
    void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        const std::size_t n = in[0]->dim(0);
        for (std::size_t r = 0; r < n; ++r) {
            const double* g = gout.data() + r * kMv;
            double* gx = gin[0]->data() + r * kMv;
            if (norms_[r] <= 1.0) {
                for (std::size_t c = 0; c < kMv; ++c) gx[c] += g[c];
                continue;
            }
            const double* y = out.data() + r * kMv;
            double dot = 0.0;
            for (std::size_t c = 0; c < kMv; ++c) dot += y[c] * g[c];
            for (std::size_t c = 0; c < kMv; ++c) gx[c] += (g[c] - y[c] * dot) / norms_[r];
        }
    }

private:
    std::vector<double> norms_;
};

class Combine3Op final : public Op {
public:
    std::string kind() const override { return "combine3"; }
    Shape output_shape(std::span<const Shape> in) const override {
        if (shape_size(in[0]) != 3) throw ShapeError("combine3: coefficients must have 3 entries, got " + shape_string(in[0]));
        if (in[1] != in[2] || in[1] != in[3])
            throw ShapeError("combine3: operands " + shape_string(in[1]) + ", " + shape_string(in[2]) + ", " +
                             shape_string(in[3]) + " differ");
        return in[1];
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const Tensor& al = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = al[0] * (*in[1])[i] + al[1] * (*in[2])[i] + al[2] * (*in[3])[i];
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        const Tensor& al = *in[0];
        for (std::size_t t = 0; t < 3; ++t) {
            if (gin[0]) {
                double s = 0.0;
                for (std::size_t i = 0; i < gout.size(); ++i) s += gout[i] * (*in[t + 1])[i];
                (*gin[0])[t] += s;
            }
            if (gin[t + 1])
                for (std::size_t i = 0; i < gout.size(); ++i) (*gin[t + 1])[i] += al[t] * gout[i];
        }
    }
};

class VectorsToMultivectorsOp final : public Op {
public:
    std::string kind() const override { return "vectors_to_multivectors"; }
    Shape output_shape(std::span<const Shape> in) const override {
        if (in[0].size() != 2 || in[0][1] != 3)
            throw ShapeError("vectors_to_multivectors: expected [n, 3], got " + shape_string(in[0]));
        return {in[0][0], kMv};
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        out.fill(0.0);
        for (std::size_t r = 0; r < in[0]->dim(0); ++r)
            for (std::size_t c = 0; c < 3; ++c) out[r * kMv + 1 + c] = (*in[0])[r * 3 + c];
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        for (std::size_t r = 0; r < in[0]->dim(0); ++r)
            for (std::size_t c = 0; c < 3; ++c) (*gin[0])[r * 3 + c] += gout[r * kMv + 1 + c];
    }
};

struct PairIndex {
    std::vector<std::size_t> first, second;
};

PairIndex pair_index(std::size_t k) {
    PairIndex p;
    p.first.reserve(k * k);
    p.second.reserve(k * k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            p.first.push_back(i);
            p.second.push_back(j);
        }
    return p;
}

NodeId param(Graph& g, const ParameterStore& store, const std::string& name) { return g.parameter(store, name); }

struct PairTerms {
    NodeId products;
    NodeId bonds_i;
    NodeId bonds_j;
    NodeId values;   // v_ij, [k*k, width]
    NodeId weights;  // w_ij, [k*k, 1]
};

PairTerms build_pair_terms(Graph& g, const ParameterStore& store, const std::string& prefix, NodeId bonds,
                           NodeId values, std::size_t k, bool reduce) {
    if (k < 1) throw std::invalid_argument("attention requires at least one bond");
    if (g.shape(bonds) != Shape{k, kMv})
        throw ShapeError("shape mismatch at '" + prefix + "': bonds " + shape_string(g.shape(bonds)) +
                         " for k = " + std::to_string(k));
    if (g.shape(values).size() != 2 || g.shape(values)[0] != k)
        throw ShapeError("shape mismatch at '" + prefix + "': values " + shape_string(g.shape(values)) +
                         " for k = " + std::to_string(k));
    const PairIndex idx = pair_index(k);
    PairTerms t{};
    t.products = pair_products(g, bonds);
    t.bonds_i = autodiff::gather_rows(g, bonds, idx.first, prefix + ".bonds_i");
    t.bonds_j = autodiff::gather_rows(g, bonds, idx.second, prefix + ".bonds_j");

    const NodeId inv = multivector_invariants(g, bonds);
    const NodeId q = autodiff::concat(g,
                                      {autodiff::gather_rows(g, inv, idx.first), autodiff::gather_rows(g, inv, idx.second),
                                       multivector_invariants(g, t.products)},
                                      1, prefix + ".invariants");
    const NodeId geometric = mlp(g, store, prefix + ".value", q);

    const NodeId mi = autodiff::dense(g, values, param(g, store, prefix + ".merge.wi"), param(g, store, prefix + ".merge.b"));
    const NodeId mj = autodiff::dense(g, values, param(g, store, prefix + ".merge.wj"));
    const NodeId merged = autodiff::add(g, autodiff::gather_rows(g, mi, idx.first), autodiff::gather_rows(g, mj, idx.second),
                                        prefix + ".merge");

    t.values = autodiff::dense(g, autodiff::concat(g, {geometric, merged}, 1), param(g, store, prefix + ".join.w"),
                               param(g, store, prefix + ".join.b"), prefix + ".join");

    const NodeId scores = mlp(g, store, prefix + ".score", t.values);
    const Shape grouped = reduce ? Shape{1, k * k} : Shape{k, k};
    t.weights = autodiff::reshape(g, autodiff::softmax(g, autodiff::reshape(g, scores, grouped), 1, prefix + ".softmax"),
                                  {k * k, 1});
    return t;
}

NodeId weighted_sum(Graph& g, NodeId pair_rows, NodeId weights, std::size_t k, bool reduce) {
    const std::size_t d = g.shape(pair_rows)[1];
    const NodeId weighted = autodiff::mul(g, pair_rows, weights);
    if (reduce) return autodiff::reshape(g, autodiff::sum(g, weighted, 0), {1, d});
    return autodiff::sum(g, autodiff::reshape(g, weighted, {k, k, d}), 1);
}

}  // namespace

NodeId pair_products(Graph& g, NodeId mv) { return g.apply(std::make_unique<PairProductsOp>(), {mv}); }
NodeId multivector_invariants(Graph& g, NodeId mv) { return g.apply(std::make_unique<InvariantsOp>(), {mv}); }
NodeId clamp_norm(Graph& g, NodeId mv) { return g.apply(std::make_unique<ClampNormOp>(), {mv}); }
NodeId combine3(Graph& g, NodeId alpha, NodeId a, NodeId b, NodeId c) {
    return g.apply(std::make_unique<Combine3Op>(), {alpha, a, b, c});
}
NodeId vectors_to_multivectors(Graph& g, NodeId v) {
    return g.apply(std::make_unique<VectorsToMultivectorsOp>(), {v});
}
NodeId vector_part(Graph& g, NodeId mv) { return autodiff::slice_cols(g, mv, 1, 4); }

void init_mlp(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out,
              std::mt19937_64& rng) {
    Tensor w0({in, hidden});
    glorot_uniform(w0, in, hidden, rng);
    Tensor w1({hidden, out});
    glorot_uniform(w1, hidden, out, rng);
    store.add(prefix + ".w0", std::move(w0));
    store.add(prefix + ".b0", Shape{hidden});
    store.add(prefix + ".w1", std::move(w1));
    store.add(prefix + ".b1", Shape{out});
}

NodeId mlp(Graph& g, const ParameterStore& store, const std::string& prefix, NodeId x) {
    const NodeId h = autodiff::relu(
        g, autodiff::dense(g, x, param(g, store, prefix + ".w0"), param(g, store, prefix + ".b0"), prefix + ".hidden"));
    return autodiff::dense(g, h, param(g, store, prefix + ".w1"), param(g, store, prefix + ".b1"), prefix + ".out");
}

void init_attention(ParameterStore& store, const std::string& prefix, const NetConfig& cfg, bool equivariant,
                    std::mt19937_64& rng) {
    const std::size_t w = cfg.width;
    init_mlp(store, prefix + ".value", 12, cfg.hidden, w, rng);
    // M = A [v_i; v_j] with A stored as its two column blocks.
    Tensor wi({w, w}), wj({w, w});
    glorot_uniform(wi, 2 * w, w, rng);
    glorot_uniform(wj, 2 * w, w, rng);
    store.add(prefix + ".merge.wi", std::move(wi));
    store.add(prefix + ".merge.wj", std::move(wj));
    store.add(prefix + ".merge.b", Shape{w});
    Tensor jw({2 * w, w});
    glorot_uniform(jw, 2 * w, w, rng);
    store.add(prefix + ".join.w", std::move(jw));
    store.add(prefix + ".join.b", Shape{w});
    init_mlp(store, prefix + ".score", w, cfg.hidden, 1, rng);
    if (equivariant) {
        init_mlp(store, prefix + ".rescale", w, cfg.hidden, 1, rng);
        store.add(prefix + ".alpha", Tensor({3}, {1.0, 1.0, 1.0}));
    }
}

NodeId attention_invariant(Graph& g, const ParameterStore& store, const std::string& prefix, NodeId bonds,
                           NodeId values, std::size_t k, bool reduce) {
    const PairTerms t = build_pair_terms(g, store, prefix, bonds, values, k, reduce);
    return weighted_sum(g, t.values, t.weights, k, reduce);
}

NodeId attention_equivariant(Graph& g, const ParameterStore& store, const std::string& prefix, NodeId bonds,
                             NodeId values, std::size_t k, bool reduce) {
    const PairTerms t = build_pair_terms(g, store, prefix, bonds, values, k, reduce);
    const NodeId rescale = mlp(g, store, prefix + ".rescale", t.values);
    const NodeId coeff = autodiff::mul(g, rescale, t.weights);
    const NodeId geometric = combine3(g, param(g, store, prefix + ".alpha"), t.bonds_i, t.bonds_j, t.products);
    return weighted_sum(g, geometric, coeff, k, reduce);
}

}  // namespace galattice::net
