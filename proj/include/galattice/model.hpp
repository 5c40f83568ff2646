#pragma once

#include <cstdint>
#include <memory>

#include "galattice/autodiff.hpp"
#include "galattice/checkpoint.hpp"
#include "galattice/tasks.hpp"

namespace galattice::model {

using autodiff::Graph;
using autodiff::NodeId;

/// Core plus the head of `task`, initialized from `seed`.
ModelParams init_model(TaskKind task, const net::NetConfig& net, const HeadConfig& head, std::uint64_t seed);

/// Replaces every "head." parameter with a fresh initialization for `task`,
/// keeping the core. Trainable flags are reset to true.
void reinit_head(ModelParams& model, TaskKind task, const HeadConfig& head, std::uint64_t seed);

/// Width of the embedding rows produced for `task`.
std::size_t embedding_width(const ModelParams& model);

/// [1, 3] x2 -> [3, 3]: rows b1, b2, b3 of the Gram-Schmidt frame.
NodeId orientation_frame(Graph& g, NodeId v1, NodeId v2);

/// Compiled evaluation graph of one model for clouds of k bonds.
class TaskGraph {
public:
    /// With `with_loss` false only the prediction and embedding nodes are built.
    TaskGraph(const ModelParams& model, std::size_t k, bool with_loss = true);

    std::size_t k() const { return k_; }
    TaskKind task() const { return task_; }

    /// Forward pass on one sample. When `stochastic` the autoencoder draws its
    /// reparameterization noise from `eta_seed` and offsets the frame inputs by
    /// 1e-8 (e1, e2); otherwise eta = 0 and no offset. Returns the
    /// loss; when `grads` is given, parameter gradients are added into it.
    double run(const ModelParams& model, const tasks::TaskSample& sample, std::uint64_t eta_seed, bool stochastic,
               tasks::Prediction* prediction = nullptr, Gradients* grads = nullptr,
               const tasks::TaskParams& params = {});

    /// Prediction and embedding row for a cloud without labels.
    tasks::Prediction predict(const ModelParams& model, const PointCloud& cloud, std::vector<double>* embedding = nullptr);

private:
    void bind(const ModelParams& model);
    void set_cloud(const PointCloud& cloud);
    tasks::Prediction collect() const;

    TaskKind task_;
    std::size_t k_;
    std::size_t n_types_;
    std::size_t latent_;
    bool with_loss_;
    std::unique_ptr<Graph> graph_;
    const ParameterStore* bound_ = nullptr;
    NodeId bonds_ = autodiff::kNoNode, types_ = autodiff::kNoNode, eta_ = autodiff::kNoNode, frame_eps_ = autodiff::kNoNode, beta_ = autodiff::kNoNode;
    NodeId target_ = autodiff::kNoNode, loss_ = autodiff::kNoNode;
    NodeId vectors_ = autodiff::kNoNode, logits_ = autodiff::kNoNode, mu_ = autodiff::kNoNode,
           logvar_ = autodiff::kNoNode, embedding_ = autodiff::kNoNode;
};

}  // namespace galattice::model
