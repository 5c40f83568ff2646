#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "galattice/checkpoint.hpp"
#include "galattice/dataset.hpp"
#include "galattice/optim.hpp"
#include "galattice/tasks.hpp"

namespace galattice::train {

struct TrainConfig {
    tasks::TaskParams task;
    AdamConfig adam;
    std::size_t batch_size = 4;
    std::size_t accumulation = 16;
    std::size_t dynamic_train_batches = 2048;
    std::size_t dynamic_val_batches = 512;
    std::size_t max_epochs = 128;
    /// Stop once the validation metric reaches this value. Disabled by default.
    double target_metric = -std::numeric_limits<double>::infinity();
    std::size_t threads = 1;
    std::uint64_t seed = 0;
    std::filesystem::path loss_log;  // CSV; empty to skip
    std::filesystem::path dump_dir;  // divergence dumps; empty for the working directory
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_metric = 0.0;
    double learning_rate = 0.0;
};

struct Evaluation {
    double loss = 0.0;
    double metric = 0.0;
};

struct TrainResult {
    ModelParams model;  // parameters at the lowest validation loss
    ModelParams last;   // parameters after the final epoch
    std::vector<EpochRecord> history;
    Evaluation initial;
    double best_metric = std::numeric_limits<double>::infinity();  // minimum over epochs
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t updates = 0;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Validation samples: static tasks use every index once; dynamic tasks use
/// dynamic_val_batches x batch_size draws with fixed seeds cycling over `indices`.
std::vector<tasks::TaskSample> validation_samples(TaskKind task, const data::CloudDataset& data,
                                                  const std::vector<std::size_t>& indices, const TrainConfig& config);

/// Mean loss and validation metric of the model on fixed samples (eta = 0).
Evaluation evaluate(const ModelParams& model, const std::vector<tasks::TaskSample>& samples, const TrainConfig& config);

/// Trains `model` on the given training / validation indices with the plateau
/// schedule of the task's regime. Throws TrainingDiverged after writing a
/// checkpoint when a loss turns non-finite.
TrainResult train(ModelParams model, const data::CloudDataset& data, const std::vector<std::size_t>& train_indices,
                  const std::vector<std::size_t>& val_indices, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

void write_loss_log(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace galattice::train
