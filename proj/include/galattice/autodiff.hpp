#pragma once

// Reverse-mode differentiation over a static graph of dense tensors.
//
// A Graph is built once (nodes are appended in topological order), bound to a
// ParameterStore, and then evaluated many times with fresh inputs. Operators
// implement the Op interface; the builtin set lives in this header and
// domain-specific operators (geometric algebra, orientation frames) are
// defined next to the code that uses them.

#include <limits>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "galattice/params.hpp"
#include "galattice/tensor.hpp"

namespace galattice::autodiff {

using NodeId = std::size_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Op {
public:
    virtual ~Op() = default;
    virtual std::string kind() const = 0;
    /// Throws ShapeError when the input shapes are not acceptable.
    virtual Shape output_shape(std::span<const Shape> inputs) const = 0;
    virtual void forward(std::span<const Tensor* const> in, Tensor& out) = 0;
    /// Accumulates (+=) into gin[i]; gin[i] is null when input i needs no gradient.
    virtual void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& gout,
                          std::span<Tensor* const> gin) = 0;
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    NodeId input(std::string name, Shape shape, bool requires_grad = false);
    /// Leaf reading parameter `name` of the store given to bind(); the shape is fixed now.
    NodeId parameter(const ParameterStore& store, std::string_view name);
    NodeId constant(Tensor value);
    /// Appends an operator node. `label` is used in error messages.
    NodeId apply(std::unique_ptr<Op> op, std::vector<NodeId> inputs, std::string label = {});

    void bind(const ParameterStore& store);

    void set_input(std::string_view name, const Tensor& value);
    void set_input(NodeId id, const Tensor& value);
    /// Evaluates every node once; all inputs must have been set since the last evaluation.
    void forward();
    /// Binds the named inputs, then evaluates. Unknown names are rejected.
    void forward(const std::map<std::string, Tensor>& inputs);

    /// Reverse sweep from a scalar node. Gradients of parameters and of inputs
    /// created with requires_grad are available afterwards.
    void backward(NodeId loss);

    const Tensor& value(NodeId id) const;
    const Tensor& grad(NodeId id) const;
    const Shape& shape(NodeId id) const { return nodes_.at(id).shape; }
    std::size_t size() const { return nodes_.size(); }
    std::string describe(NodeId id) const;

    /// Adds gradients of trainable parameters into `into` (aligned with the bound store).
    void add_parameter_gradients(Gradients& into) const;

private:
    enum class NodeKind { Input, Parameter, Constant, Operation };
    struct Node {
        NodeKind kind;
        std::string label;
        Shape shape;
        std::unique_ptr<Op> op;
        std::vector<NodeId> inputs;
        std::size_t param_index = 0;
        bool input_requires_grad = false;
        bool bound = false;
        bool needs_grad = false;
        Tensor value;
        Tensor grad;
    };

    const Tensor& node_value(const Node& n) const;
    Node& checked(NodeId id);

    std::vector<Node> nodes_;
    std::map<std::string, NodeId, std::less<>> input_names_;
    const ParameterStore* store_ = nullptr;
    std::vector<const Tensor*> in_scratch_;
    std::vector<Tensor*> gin_scratch_;
};

// Builtin operators. Each appends one node and returns its id.

/// x[..., in] * w[in, out] (+ b[out]).
NodeId dense(Graph& g, NodeId x, NodeId w, NodeId b = kNoNode, std::string label = {});
NodeId relu(Graph& g, NodeId x);
NodeId exp(Graph& g, NodeId x);
NodeId scale(Graph& g, NodeId x, double factor);
/// Softmax along `axis`.
NodeId softmax(Graph& g, NodeId x, std::size_t axis, std::string label = {});
/// Normalizes over the last axis, then applies per-feature gain and bias.
NodeId layer_norm(Graph& g, NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
NodeId concat(Graph& g, const std::vector<NodeId>& xs, std::size_t axis, std::string label = {});
/// Elementwise with broadcasting of b: same shape, scalar, column [rows, 1] or row [1, cols].
NodeId add(Graph& g, NodeId a, NodeId b, std::string label = {});
NodeId mul(Graph& g, NodeId a, NodeId b, std::string label = {});
NodeId sum(Graph& g, NodeId x, std::size_t axis);
NodeId mean(Graph& g, NodeId x, std::size_t axis);
NodeId reshape(Graph& g, NodeId x, Shape shape);
/// Rows of a [rows, cols] view selected by index; backward scatter-adds.
NodeId gather_rows(Graph& g, NodeId x, std::vector<std::size_t> rows, std::string label = {});
NodeId slice_cols(Graph& g, NodeId x, std::size_t begin, std::size_t end);
/// Mean of squared differences over all elements; returns shape [1].
NodeId mse(Graph& g, NodeId prediction, NodeId target);
/// Categorical cross-entropy of logits [n, classes] against class indices [n], averaged over rows.
NodeId cross_entropy(Graph& g, NodeId logits, NodeId labels);
/// KL(N(mu, exp(logvar)) || N(0, 1)), summed over the last axis and averaged over rows.
NodeId kl_standard_normal(Graph& g, NodeId mu, NodeId logvar);

}  // namespace galattice::autodiff
