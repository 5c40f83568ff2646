#include "galattice/model.hpp"

#include <random>
#include <stdexcept>
#include <string>

#include "galattice/core.hpp"

namespace galattice::model {

namespace ad = autodiff;

namespace {

using net::NetConfig;

class OrientationFrameOp final : public ad::Op {
public:
    std::string kind() const override { return "orientation_frame"; }
    Shape output_shape(std::span<const Shape> in) const override {
        for (const Shape& s : in)
            if (shape_size(s) != 3) throw ad::ShapeError("orientation_frame: inputs must hold 3 values, got " + shape_string(s));
        return {3, 3};
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const Vec3 v1(in[0]->data()), v2(in[1]->data());
        const Mat3 m = tasks::orientation_bottleneck(v1, v2);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(3 * r + c)] = m(r, c);
    }
    void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        const Vec3 v1(in[0]->data()), v2(in[1]->data());
        const Vec3 b1(out.data()), b2(out.data() + 3);
        const Vec3 g1(gout.data()), g2(gout.data() + 3), g3(gout.data() + 6);
        // b3 = b1 x b2
        Vec3 gb1 = g1 + b2.cross(g3);
        const Vec3 gb2 = g2 + g3.cross(b1);
        // b2 = u / |u|, u = v2 - (v2 . b1) b1
        const Vec3 u = v2 - v2.dot(b1) * b1;
        const double nu = u.norm();
        const Vec3 gu = (gb2 - gb2.dot(b2) * b2) / nu;
        const Vec3 gv2 = gu - gu.dot(b1) * b1;
        gb1 += -b1.dot(v2) * gu - b1.dot(gu) * v2;
        // b1 = v1 / |v1|
        const Vec3 gv1 = (gb1 - gb1.dot(b1) * b1) / v1.norm();
        if (gin[0])
            for (int i = 0; i < 3; ++i) (*gin[0])[static_cast<std::size_t>(i)] += gv1[i];
        if (gin[1])
            for (int i = 0; i < 3; ++i) (*gin[1])[static_cast<std::size_t>(i)] += gv2[i];
    }
};

struct HeadNodes {
    NodeId vectors = ad::kNoNode;
    NodeId logits = ad::kNoNode;
    NodeId mu = ad::kNoNode;
    NodeId logvar = ad::kNoNode;
    NodeId embedding = ad::kNoNode;
};

void init_head(ParameterStore& s, TaskKind task, const NetConfig& net, const HeadConfig& head, std::mt19937_64& rng) {
    const std::size_t w = net.width;
    switch (task) {
        case TaskKind::Denoising:
        case TaskKind::ShiftIdentification:
        case TaskKind::NearestBond:
            net::init_attention(s, "head.attention", net, true, rng);
            break;
        case TaskKind::FrameClassification:
            if (head.n_classes < 2) throw std::invalid_argument("frame classification needs at least 2 classes");
            net::init_attention(s, "head.attention", net, false, rng);
            net::init_mlp(s, "head.classifier", w, net.hidden, head.n_classes, rng);
            break;
        case TaskKind::NoisyBond:
            net::init_attention(s, "head.attention", net, false, rng);
            net::init_mlp(s, "head.classifier", w, net.hidden, 2, rng);
            break;
        case TaskKind::Autoencoder: {
            net::init_attention(s, "head.orient1", net, true, rng);
            net::init_attention(s, "head.orient2", net, true, rng);
            net::init_attention(s, "head.encoder.attention", net, false, rng);
            net::init_mlp(s, "head.encoder", w, net.hidden, 2 * head.latent, rng);
            Tensor tokens({head.decoder_tokens, w});
            glorot_uniform(tokens, head.decoder_tokens, w, rng);
            s.add("head.decoder.tokens", std::move(tokens));
            net::init_mlp(s, "head.decoder.latent", head.latent, net.hidden, w, rng);
            Tensor basis({3, w});
            glorot_uniform(basis, 3, w, rng);
            s.add("head.decoder.basis", std::move(basis));
            net::init_attention(s, "head.decoder.attention", net, true, rng);
            break;
        }
    }
}

HeadNodes build_head(Graph& g, const ModelParams& m, const net::CoreNodes& core, std::size_t k, NodeId eta,
                    NodeId frame_eps) {
    const ParameterStore& s = m.params;
    const std::size_t w = m.net.width;
    HeadNodes h;
    switch (m.task) {
        case TaskKind::Denoising:
            h.vectors = net::vector_part(
                g, net::attention_equivariant(g, s, "head.attention", core.multivectors, core.values, k, false));
            break;
        case TaskKind::ShiftIdentification:
        case TaskKind::NearestBond:
            h.vectors = net::vector_part(
                g, net::attention_equivariant(g, s, "head.attention", core.multivectors, core.values, k, true));
            break;
        case TaskKind::FrameClassification:
            h.embedding = net::attention_invariant(g, s, "head.attention", core.multivectors, core.values, k, true);
            h.logits = net::mlp(g, s, "head.classifier", h.embedding);
            break;
        case TaskKind::NoisyBond:
            h.logits = net::mlp(
                g, s, "head.classifier",
                net::attention_invariant(g, s, "head.attention", core.multivectors, core.values, k, false));
            break;
        case TaskKind::Autoencoder: {
            const std::size_t latent = m.head.latent, tokens = m.head.decoder_tokens;
            const NodeId r1 = net::vector_part(
                g, net::attention_equivariant(g, s, "head.orient1", core.multivectors, core.values, k, true));
            const NodeId r2 = net::vector_part(
                g, net::attention_equivariant(g, s, "head.orient2", core.multivectors, core.values, k, true));
            const NodeId v1 = ad::add(g, r1, ad::gather_rows(g, frame_eps, {0}));
            const NodeId v2 = ad::add(g, r2, ad::gather_rows(g, frame_eps, {1}));
            const NodeId frame = orientation_frame(g, v1, v2);

            const NodeId pooled =
                net::attention_invariant(g, s, "head.encoder.attention", core.multivectors, core.values, k, true);
            const NodeId stats = net::mlp(g, s, "head.encoder", pooled);
            h.mu = ad::slice_cols(g, stats, 0, latent);
            h.logvar = ad::slice_cols(g, stats, latent, 2 * latent);
            h.embedding = h.mu;
            const NodeId z = ad::add(g, h.mu, ad::mul(g, ad::exp(g, ad::scale(g, h.logvar, 0.5)), eta), "head.z");

            const NodeId token_values = ad::add(g, g.parameter(s, "head.decoder.tokens"),
                                                net::mlp(g, s, "head.decoder.latent", z), "head.decoder.condition");
            const NodeId values =
                ad::concat(g, {token_values, g.parameter(s, "head.decoder.basis")}, 0, "head.decoder.values");
            const NodeId mvs = ad::concat(
                g, {g.constant(Tensor({tokens, ga::kComponents})), net::vectors_to_multivectors(g, frame)}, 0,
                "head.decoder.multivectors");
            const NodeId decoded =
                net::attention_equivariant(g, s, "head.decoder.attention", mvs, values, tokens + 3, false);
            std::vector<std::size_t> rows(tokens);
            for (std::size_t i = 0; i < tokens; ++i) rows[i] = i;
            h.vectors = net::vector_part(g, ad::gather_rows(g, decoded, rows, "head.decoder.tokens_out"));
            break;
        }
    }
    if (h.embedding == ad::kNoNode) h.embedding = ad::reshape(g, ad::mean(g, core.values, 0), {1, w});
    return h;
}

}  // namespace

NodeId orientation_frame(Graph& g, NodeId v1, NodeId v2) {
    return g.apply(std::make_unique<OrientationFrameOp>(), {v1, v2}, "orientation_frame");
}

ModelParams init_model(TaskKind task, const net::NetConfig& net, const HeadConfig& head, std::uint64_t seed) {
    ModelParams m;
    m.task = task;
    m.net = net;
    m.head = head;
    std::mt19937_64 rng(seed);
    net::init_core(m.params, net, rng);
    init_head(m.params, task, net, head, rng);
    return m;
}

void reinit_head(ModelParams& model, TaskKind task, const HeadConfig& head, std::uint64_t seed) {
    ModelParams fresh;
    fresh.task = task;
    fresh.net = model.net;
    fresh.head = head;
    for (std::size_t i = 0; i < model.params.size(); ++i)
        if (model.params.name(i).starts_with("core.")) fresh.params.add(model.params.name(i), model.params.value(i));
    std::mt19937_64 rng(seed);
    init_head(fresh.params, task, model.net, head, rng);
    model = std::move(fresh);
}

std::size_t embedding_width(const ModelParams& model) {
    return model.task == TaskKind::Autoencoder ? model.head.latent : model.net.width;
}

TaskGraph::TaskGraph(const ModelParams& model, std::size_t k, bool with_loss)
    : task_(model.task),
      k_(k),
      n_types_(model.net.n_types),
      latent_(model.head.latent),
      with_loss_(with_loss),
      graph_(std::make_unique<Graph>()) {
    if (task_ == TaskKind::Autoencoder && with_loss && k != model.head.decoder_tokens)
        throw std::invalid_argument("autoencoder decodes " + std::to_string(model.head.decoder_tokens) +
                                    " points but the cloud has " + std::to_string(k) + " bonds");
    Graph& g = *graph_;
    bonds_ = g.input("bonds", {k, ga::kComponents});
    types_ = g.input("types", {k, n_types_});
    if (task_ == TaskKind::Autoencoder) {
        eta_ = g.input("eta", {1, latent_});
        frame_eps_ = g.input("frame_eps", {2, 3});
    }
    const net::CoreNodes core = net::build_core(g, model.params, model.net, bonds_, types_, k);
    const HeadNodes h = build_head(g, model, core, k, eta_, frame_eps_);
    vectors_ = h.vectors;
    logits_ = h.logits;
    mu_ = h.mu;
    logvar_ = h.logvar;
    embedding_ = h.embedding;
    if (!with_loss) return;
    switch (task_) {
        case TaskKind::FrameClassification:
            target_ = g.input("target", {1});
            loss_ = ad::cross_entropy(g, logits_, target_);
            break;
        case TaskKind::NoisyBond:
            target_ = g.input("target", {k});
            loss_ = ad::cross_entropy(g, logits_, target_);
            break;
        default: {
            target_ = g.input("target", g.shape(vectors_));
            loss_ = ad::mse(g, vectors_, target_);
            if (task_ == TaskKind::Autoencoder) {
                beta_ = g.input("beta", {1});
                loss_ = ad::add(g, loss_, ad::mul(g, ad::kl_standard_normal(g, mu_, logvar_), beta_), "loss");
            }
        }
    }
}

void TaskGraph::bind(const ModelParams& model) {
    if (model.task != task_)
        throw std::invalid_argument("graph built for task '" + std::string(task_id(task_)) + "' used with a '" +
                                    std::string(task_id(model.task)) + "' model");
    if (bound_ != &model.params) {
        graph_->bind(model.params);
        bound_ = &model.params;
    }
}

void TaskGraph::set_cloud(const PointCloud& cloud) {
    if (cloud.size() != k_)
        throw std::invalid_argument("graph compiled for k = " + std::to_string(k_) + " got a cloud of " +
                                    std::to_string(cloud.size()));
    graph_->set_input(bonds_, bonds_as_multivectors(cloud));
    graph_->set_input(types_, types_one_hot(cloud, n_types_));
}

tasks::Prediction TaskGraph::collect() const {
    tasks::Prediction p;
    const Graph& g = *graph_;
    if (vectors_ != ad::kNoNode) {
        const Tensor& v = g.value(vectors_);
        for (std::size_t r = 0; r < v.rows(); ++r) p.vectors.emplace_back(v[3 * r], v[3 * r + 1], v[3 * r + 2]);
    }
    if (logits_ != ad::kNoNode) {
        const Tensor& l = g.value(logits_);
        p.logits.assign(l.values().begin(), l.values().end());
        p.classes = l.cols();
    }
    if (mu_ != ad::kNoNode) {
        p.mu.assign(g.value(mu_).values().begin(), g.value(mu_).values().end());
        p.logvar.assign(g.value(logvar_).values().begin(), g.value(logvar_).values().end());
    }
    return p;
}

double TaskGraph::run(const ModelParams& model, const tasks::TaskSample& sample, std::uint64_t eta_seed,
                      bool stochastic, tasks::Prediction* prediction, Gradients* grads,
                      const tasks::TaskParams& params) {
    if (!with_loss_) throw std::logic_error("TaskGraph::run needs a graph built with a loss");
    if (sample.kind != task_) throw std::invalid_argument("sample of task '" + std::string(task_id(sample.kind)) + "'");
    bind(model);
    set_cloud(sample.input);
    Graph& g = *graph_;
    if (eta_ != ad::kNoNode) {
        Tensor eta({1, latent_});
        if (stochastic) {
            std::mt19937_64 rng(eta_seed);
            std::normal_distribution<double> n(0.0, 1.0);
            for (double& x : eta.storage()) x = n(rng);
        }
        g.set_input(eta_, eta);
        g.set_input(frame_eps_, stochastic ? Tensor::matrix(2, 3, {1e-8, 0.0, 0.0, 0.0, 1e-8, 0.0}) : Tensor({2, 3}));
        g.set_input(beta_, Tensor({1}, {params.beta}));
    }
    if (is_classification(task_)) {
        const auto t = tasks::class_targets(sample);
        Tensor target(g.shape(target_));
        for (std::size_t i = 0; i < t.size(); ++i) target[i] = static_cast<double>(t[i]);
        g.set_input(target_, target);
    } else {
        const auto t = tasks::geometric_target(sample);
        Tensor target(g.shape(target_));
        if (t.size() * 3 != target.size())
            throw std::invalid_argument("target holds " + std::to_string(t.size()) + " vectors, graph expects " +
                                        shape_string(target.shape()));
        for (std::size_t i = 0; i < t.size(); ++i)
            for (int c = 0; c < 3; ++c) target[3 * i + static_cast<std::size_t>(c)] = t[i][c];
        g.set_input(target_, target);
    }
    g.forward();
    const double loss = g.value(loss_)[0];
    if (prediction) *prediction = collect();
    if (grads) {
        g.backward(loss_);
        g.add_parameter_gradients(*grads);
    }
    return loss;
}

tasks::Prediction TaskGraph::predict(const ModelParams& model, const PointCloud& cloud, std::vector<double>* embedding) {
    if (with_loss_) throw std::logic_error("TaskGraph::predict needs a graph built without a loss");
    bind(model);
    set_cloud(cloud);
    if (eta_ != ad::kNoNode) {
        graph_->set_input(eta_, Tensor({1, latent_}));
        graph_->set_input(frame_eps_, Tensor({2, 3}));
    }
    graph_->forward();
    if (embedding) {
        const auto e = graph_->value(embedding_).values();
        embedding->assign(e.begin(), e.end());
    }
    return collect();
}

}  // namespace galattice::model
