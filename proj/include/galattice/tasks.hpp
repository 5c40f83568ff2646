#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "galattice/point_cloud.hpp"
#include "galattice/task_kind.hpp"

namespace galattice::tasks {

struct TaskParams {
    double noise_std = 0.5;  // sigma0, denoising / shift / noisy bond
    double beta = 1e-2;      // KL weight of the autoencoder loss
};

using CloudLabel = std::vector<Vec3>;  // autoencoder, denoising
using ClassLabel = std::size_t;        // frame classification
using VectorLabel = Vec3;              // shift, nearest bond
using FlagLabel = std::vector<int>;    // noisy bond, one 0/1 flag per bond
using Label = std::variant<CloudLabel, ClassLabel, VectorLabel, FlagLabel>;

struct TaskSample {
    TaskKind kind = TaskKind::FrameClassification;
    PointCloud input;
    Label label;
    std::uint64_t seed = 0;
};

/// Minimum number of bonds a cloud needs for the kind.
std::size_t min_bonds(TaskKind kind);

/// Builds the (input, label) pair. `class_index` is only read for frame
/// classification. Throws std::invalid_argument when the cloud is too small.
TaskSample make_sample(TaskKind kind, const PointCloud& cloud, std::size_t class_index, std::uint64_t seed,
                       const TaskParams& params = {});

/// Rotation R minimizing sum |R p_i - x_i|^2 over centered point sets (det R = +1).
Mat3 best_fit_rotation(const std::vector<Vec3>& moving, const std::vector<Vec3>& target);

/// Rows are b1 = v1/|v1|, b2 = normalized part of v2 orthogonal to v1, b3 = b1 x b2.
/// Throws std::invalid_argument when either norm falls below 1e-8.
Mat3 orientation_bottleneck(const Vec3& v1, const Vec3& v2);

/// Bonds ordered by length, ties by index.
std::vector<Vec3> sorted_by_radius(const std::vector<Vec3>& bonds);

/// Network outputs for one sample.
struct Prediction {
    std::vector<Vec3> vectors;   // denoising k, autoencoder tokens, shift/nearest 1
    std::vector<double> logits;  // frame [classes], noisy bond [k x 2] row-major
    std::size_t classes = 0;
    std::vector<double> mu;      // autoencoder latent
    std::vector<double> logvar;
};

/// Target rows a geometric prediction is compared against.
std::vector<Vec3> geometric_target(const TaskSample& sample);
/// Class index per prediction row for classification kinds.
std::vector<std::size_t> class_targets(const TaskSample& sample);

/// Loss of one sample: coordinate MSE (+ beta KL for the autoencoder) or mean cross-entropy.
double task_loss(const Prediction& prediction, const TaskSample& sample, const TaskParams& params = {});

/// Mean absolute coordinate error for geometric kinds, 1 - accuracy for classification.
/// Throws std::invalid_argument on an empty set or arity mismatch.
double validation_metric(TaskKind kind, const std::vector<Prediction>& predictions,
                         const std::vector<TaskSample>& samples);

/// Index of the largest logit in [begin, end), ties to the lowest index.
std::size_t argmax(const double* begin, const double* end);

}  // namespace galattice::tasks
