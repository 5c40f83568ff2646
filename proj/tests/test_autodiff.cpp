#include "galattice/autodiff.hpp"
#include "helpers.hpp"

using namespace galattice;
using namespace galattice::autodiff;
using testing::grad_close;
using testing::numeric_gradient;
using testing::project_to_scalar;
using testing::random_tensor;

namespace {

// Builds y = op(inputs), a random scalar projection of y, and checks the
// gradient of every input against central differences.
void check_op_gradients(std::vector<Tensor> values,
                        const std::function<NodeId(Graph&, const std::vector<NodeId>&)>& build,
                        std::uint64_t seed = 1, double rtol = 1e-5) {
    std::mt19937_64 rng(seed);
    Graph g;
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < values.size(); ++i)
        ids.push_back(g.input("x" + std::to_string(i), values[i].shape(), true));
    const NodeId loss = project_to_scalar(g, build(g, ids), rng);
    auto eval = [&]() {
        for (std::size_t i = 0; i < ids.size(); ++i) g.set_input(ids[i], values[i]);
        g.forward();
        return g.value(loss)[0];
    };
    eval();
    g.backward(loss);
    std::vector<Tensor> analytic;
    for (NodeId id : ids) analytic.push_back(g.grad(id));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto numeric = numeric_gradient(values[i], eval);
        for (std::size_t j = 0; j < numeric.size(); ++j) {
            CAPTURE(i);
            CAPTURE(j);
            CHECK(grad_close(analytic[i][j], numeric[j], rtol));
        }
    }
}

}  // namespace

TEST_CASE("dense with identity weights and zero bias is the identity") {
    Graph g;
    const NodeId x = g.input("x", {3, 4});
    const NodeId w = g.constant(Tensor::matrix(4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}));
    const NodeId b = g.constant(Tensor({4}));
    const NodeId y = dense(g, x, w, b);
    std::mt19937_64 rng(1);
    const Tensor xv = random_tensor({3, 4}, rng);
    g.forward({{"x", xv}});
    CHECK(g.value(y) == xv);
}

TEST_CASE("softmax and cross-entropy closed forms") {
    Graph g;
    const NodeId x = g.input("x", {1, 2});
    const NodeId labels = g.input("labels", {1});
    const NodeId s = softmax(g, x, 1);
    const NodeId ce = cross_entropy(g, x, labels);
    g.forward({{"x", Tensor::matrix(1, 2, {0.0, 0.0})}, {"labels", Tensor({1}, {0.0})}});
    CHECK(g.value(s)[0] == doctest::Approx(0.5));
    CHECK(g.value(s)[1] == doctest::Approx(0.5));
    CHECK(g.value(ce)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("loss x^2 at 3 has gradient 6") {
    Graph g;
    const NodeId x = g.input("x", {1}, true);
    const NodeId loss = mul(g, x, x);
    g.forward({{"x", Tensor({1}, {3.0})}});
    g.backward(loss);
    CHECK(g.value(loss)[0] == 9.0);
    CHECK(g.grad(x)[0] == 6.0);
}

TEST_CASE("gradient of a mean is 1/n per element") {
    Graph g;
    const NodeId x = g.input("x", {7}, true);
    const NodeId loss = mean(g, x, 0);
    std::mt19937_64 rng(2);
    g.forward({{"x", random_tensor({7}, rng)}});
    g.backward(loss);
    for (std::size_t i = 0; i < 7; ++i) CHECK(g.grad(x)[i] == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("errors: non-scalar loss, unbound input, shape mismatch names the node") {
    Graph g;
    const NodeId x = g.input("x", {2, 3}, true);
    const NodeId w = g.constant(Tensor({4, 2}));
    CHECK_THROWS_WITH_AS(dense(g, x, w, kNoNode, "layer1"), doctest::Contains("layer1"), ShapeError);

    const NodeId y = relu(g, x);
    CHECK_THROWS_WITH_AS(g.forward(), doctest::Contains("unbound input 'x'"), GraphError);
    g.forward({{"x", Tensor({2, 3})}});
    CHECK_THROWS_WITH_AS(g.backward(y), doctest::Contains("not scalar"), GraphError);
    CHECK_THROWS_AS(g.forward({{"nope", Tensor({1})}}), GraphError);
}

TEST_CASE("finite-difference checks for every operator") {
    std::mt19937_64 rng(42);
    SUBCASE("dense") {
        check_op_gradients({random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5}, rng)},
                           [](Graph& g, const std::vector<NodeId>& x) { return dense(g, x[0], x[1], x[2]); });
    }
    SUBCASE("relu") {
        Tensor t = random_tensor({4, 5}, rng);
        for (double& v : t.storage())
            if (std::abs(v) < 0.05) v = 0.3;
        check_op_gradients({t}, [](Graph& g, const std::vector<NodeId>& x) { return relu(g, x[0]); });
    }
    SUBCASE("exp and scale") {
        check_op_gradients({random_tensor({3, 3}, rng)},
                           [](Graph& g, const std::vector<NodeId>& x) { return scale(g, exp(g, x[0]), -0.7); });
    }
    SUBCASE("softmax over each axis") {
        for (std::size_t axis = 0; axis < 3; ++axis)
            check_op_gradients({random_tensor({2, 3, 4}, rng)},
                               [axis](Graph& g, const std::vector<NodeId>& x) { return softmax(g, x[0], axis); });
    }
    SUBCASE("layer_norm") {
        check_op_gradients({random_tensor({4, 6}, rng), random_tensor({6}, rng), random_tensor({6}, rng)},
                           [](Graph& g, const std::vector<NodeId>& x) { return layer_norm(g, x[0], x[1], x[2]); });
    }
    SUBCASE("concat") {
        check_op_gradients({random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)},
                           [](Graph& g, const std::vector<NodeId>& x) { return concat(g, {x[0], x[1]}, 1); });
        check_op_gradients({random_tensor({2, 3}, rng), random_tensor({4, 3}, rng)},
                           [](Graph& g, const std::vector<NodeId>& x) { return concat(g, {x[0], x[1]}, 0); });
    }
    SUBCASE("add and mul with every broadcast") {
        for (const Shape& b : {Shape{3, 4}, Shape{1}, Shape{3, 1}, Shape{1, 4}, Shape{4}}) {
            check_op_gradients({random_tensor({3, 4}, rng), random_tensor(b, rng)},
                               [](Graph& g, const std::vector<NodeId>& x) { return add(g, x[0], x[1]); });
            check_op_gradients({random_tensor({3, 4}, rng), random_tensor(b, rng)},
                               [](Graph& g, const std::vector<NodeId>& x) { return mul(g, x[0], x[1]); });
        }
    }
    SUBCASE("sum and mean over each axis") {
        for (std::size_t axis = 0; axis < 3; ++axis) {
            check_op_gradients({random_tensor({2, 3, 4}, rng)},
                               [axis](Graph& g, const std::vector<NodeId>& x) { return sum(g, x[0], axis); });
            check_op_gradients({random_tensor({2, 3, 4}, rng)},
                               [axis](Graph& g, const std::vector<NodeId>& x) { return mean(g, x[0], axis); });
        }
    }
    SUBCASE("reshape, gather_rows and slice_cols") {
        check_op_gradients({random_tensor({3, 4}, rng)},
                           [](Graph& g, const std::vector<NodeId>& x) { return reshape(g, x[0], {2, 6}); });
        check_op_gradients({random_tensor({3, 4}, rng)}, [](Graph& g, const std::vector<NodeId>& x) {
            return gather_rows(g, x[0], {2, 0, 2, 1, 2});
        });
        check_op_gradients({random_tensor({3, 8}, rng)},
                           [](Graph& g, const std::vector<NodeId>& x) { return slice_cols(g, x[0], 1, 4); });
    }
    SUBCASE("losses") {
        check_op_gradients({random_tensor({4, 3}, rng), random_tensor({4, 3}, rng)},
                           [](Graph& g, const std::vector<NodeId>& x) { return mse(g, x[0], x[1]); });
        check_op_gradients({random_tensor({3, 5}, rng, -2.0, 2.0)}, [](Graph& g, const std::vector<NodeId>& x) {
            return cross_entropy(g, x[0], g.constant(Tensor({3}, {4.0, 0.0, 2.0})));
        });
        check_op_gradients({random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)},
                           [](Graph& g, const std::vector<NodeId>& x) { return kl_standard_normal(g, x[0], x[1]); });
    }
}

TEST_CASE("two-layer MLP parameter gradients match finite differences") {
    std::mt19937_64 rng(7);
    ParameterStore store;
    store.add("w0", random_tensor({5, 8}, rng));
    store.add("b0", random_tensor({8}, rng));
    store.add("w1", random_tensor({8, 3}, rng));
    store.add("b1", random_tensor({3}, rng));
    Graph g;
    const NodeId x = g.input("x", {6, 5});
    const NodeId t = g.input("t", {6, 3});
    const NodeId h = relu(g, dense(g, x, g.parameter(store, "w0"), g.parameter(store, "b0")));
    const NodeId y = dense(g, h, g.parameter(store, "w1"), g.parameter(store, "b1"));
    const NodeId loss = mse(g, y, t);
    g.bind(store);
    const Tensor xv = random_tensor({6, 5}, rng), tv = random_tensor({6, 3}, rng);
    auto eval = [&]() {
        g.forward({{"x", xv}, {"t", tv}});
        return g.value(loss)[0];
    };
    eval();
    g.backward(loss);
    Gradients grads(store);
    g.add_parameter_gradients(grads);
    for (std::size_t p = 0; p < store.size(); ++p) {
        const auto numeric = numeric_gradient(store.value(p), eval);
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            CAPTURE(store.name(p));
            CHECK(grad_close(grads[p][i], numeric[i], 1e-5));
        }
    }
}

TEST_CASE("softmax rows sum to one and layer norm standardizes rows") {
    std::mt19937_64 rng(9);
    Graph g;
    const NodeId x = g.input("x", {20, 16});
    const NodeId s = softmax(g, x, 1);
    const NodeId gain = g.constant(Tensor({16}, 1.0));
    const NodeId bias = g.constant(Tensor({16}));
    // eps = 0: the normalized variance is var / (var + eps) exactly 1 only without the stabilizer
    const NodeId ln0 = layer_norm(g, x, gain, bias, 0.0);
    const NodeId ln = layer_norm(g, x, gain, bias);
    g.forward({{"x", random_tensor({20, 16}, rng, -300.0, 300.0)}});
    for (std::size_t r = 0; r < 20; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < 16; ++c) total += g.value(s)[r * 16 + c];
        CHECK(std::abs(total - 1.0) < 1e-12);
        for (NodeId id : {ln0, ln}) {
            double m = 0.0, v = 0.0;
            for (std::size_t c = 0; c < 16; ++c) m += g.value(id)[r * 16 + c];
            m /= 16.0;
            for (std::size_t c = 0; c < 16; ++c) v += std::pow(g.value(id)[r * 16 + c] - m, 2);
            v /= 16.0;
            CHECK(std::abs(m) < 1e-10);
            CHECK(std::abs(v - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("repeated evaluation is bit-identical") {
    std::mt19937_64 rng(13);
    ParameterStore store;
    store.add("w", random_tensor({4, 4}, rng));
    Graph g;
    const NodeId x = g.input("x", {3, 4});
    const NodeId loss = mean(g, reshape(g, softmax(g, dense(g, x, g.parameter(store, "w")), 1), {12}), 0);
    g.bind(store);
    const Tensor xv = random_tensor({3, 4}, rng);
    auto run = [&]() {
        g.forward({{"x", xv}});
        g.backward(loss);
        Gradients gr(store);
        g.add_parameter_gradients(gr);
        return std::make_pair(g.value(loss), gr[0]);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}
