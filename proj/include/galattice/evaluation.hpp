#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "galattice/checkpoint.hpp"
#include "galattice/dataset.hpp"
#include "galattice/point_cloud.hpp"
#include "galattice/structure.hpp"

namespace galattice::eval {

using Matrix = Eigen::MatrixXd;

struct EmbeddingMatrix {
    std::string source;  // task id or baseline method
    Matrix rows;
    std::vector<std::string> provenance;  // per row, may be empty
};

/// One embedding row per cloud: frame pooled values, autoencoder mu, or the
/// bond mean of the core values for the remaining tasks.
EmbeddingMatrix embed(const ModelParams& model, const std::vector<PointCloud>& clouds, std::size_t threads = 1);

/// Clouds of every particle of a configuration (or the first `max_particles`
/// of a seeded permutation when nonzero), in ascending particle order.
std::vector<PointCloud> configuration_clouds(const structure::Configuration& config, std::size_t k,
                                             std::size_t max_particles = 0, std::uint64_t seed = 0,
                                             std::size_t threads = 1);

struct PcaResult {
    Eigen::VectorXd mean;
    Matrix components;           // one unit-norm component per row
    Matrix projected;            // rows x n_components
    Eigen::VectorXd variance;    // descending, sample variance (n - 1)
    Eigen::VectorXd explained;   // variance / total variance
    bool rank_deficient = false; // more components requested than the data rank supports
};

/// Principal components of the mean-centered rows. The largest-magnitude
/// loading of every component is positive.
PcaResult pca(const Matrix& data, std::size_t n_components);

struct RocResult {
    double auc = 0.5;  // folded
    double raw = 0.5;  // probability that a B score exceeds an A score, ties 1/2
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

RocResult roc_auc(const std::vector<double>& scores_a, const std::vector<double>& scores_b);

struct SnapshotPair {
    std::string label;
    structure::Configuration a;
    structure::Configuration b;
};

using Featurizer = std::function<Matrix(const std::vector<PointCloud>&)>;

/// Featurizes both populations jointly, fits PCA on the union and scores every
/// row by its first principal coordinate.
RocResult zero_shot(const Matrix& features_a, const Matrix& features_b);
RocResult zero_shot_pair(const Featurizer& featurize, const SnapshotPair& pair, std::size_t k = 20,
                         std::size_t max_particles = 0, std::uint64_t seed = 0, std::size_t threads = 1);

struct ZeroShotRow {
    std::string pair;
    std::string method;
    RocResult roc;
};

void write_zero_shot_csv(const std::vector<ZeroShotRow>& rows, const std::filesystem::path& path);

/// Training classes of a trajectory: frames 0, stride, 2 stride, ...
std::vector<std::size_t> training_frames(std::size_t n_frames, std::size_t stride);

/// Class per frame: the position of the nearest preceding training frame.
std::size_t frame_class(std::size_t frame_position, std::size_t stride);

/// Dataset of `clouds_per_frame` clouds from each training frame, labeled by class.
data::CloudDataset trajectory_dataset(const std::vector<structure::TrajectoryFrame>& frames, std::size_t stride,
                                      std::size_t clouds_per_frame, std::size_t k, double validation_fraction,
                                      std::uint64_t seed, std::size_t threads = 1);

struct FrameHistogram {
    std::vector<std::size_t> frame_index;
    std::vector<bool> training;
    std::vector<std::optional<double>> tag;
    std::vector<std::vector<std::size_t>> counts;  // frame x predicted class
};

/// Per-particle argmax class counts of every frame.
FrameHistogram frame_histogram(const ModelParams& classifier, const std::vector<structure::TrajectoryFrame>& frames,
                               std::size_t stride = 4, std::size_t k = 20, std::size_t max_particles = 0,
                               std::uint64_t seed = 0, std::size_t threads = 1);

void write_frame_histogram_csv(const FrameHistogram& h, const std::filesystem::path& path);

}  // namespace galattice::eval
