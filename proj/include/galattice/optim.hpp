#pragma once

#include <cstddef>
#include <vector>

#include "galattice/params.hpp"

namespace galattice {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam moments plus a gradient accumulation window.
struct OptimizerState {
    explicit OptimizerState(const ParameterStore& params, AdamConfig config = {});

    AdamConfig config;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::size_t step = 0;

    /// Summed gradients of the current window and the number of clouds they cover.
    Gradients accumulated;
    std::size_t accumulated_samples = 0;
    std::size_t accumulated_batches = 0;

    double learning_rate() const { return config.learning_rate; }
    void set_learning_rate(double lr) { config.learning_rate = lr; }
};

/// Adds a batch's summed per-sample gradients to the window.
void accumulate(OptimizerState& state, const Gradients& batch_sum, std::size_t samples);

/// One bias-corrected Adam update of every trainable parameter using `grads`.
/// Non-trainable parameters are left untouched. Throws on layout mismatch.
void adam_step(OptimizerState& state, ParameterStore& params, const Gradients& grads);

/// Applies the mean gradient of the accumulation window, then clears it.
/// Returns false (and does nothing) when the window is empty.
bool apply_accumulated(OptimizerState& state, ParameterStore& params);

enum class ScheduleRegime { Static, Dynamic };

struct ScheduleDecision {
    double learning_rate = 0.0;
    bool stop = false;
    bool improved = false;
};

/// Plateau schedule driven by per-epoch validation losses.
///   Static:  halve on every non-improving epoch, stop after 2 epochs without improvement.
///   Dynamic: halve after every 4 epochs without improvement, stop after 10.
/// Both stop at 128 epochs. Improvement means strictly below the best loss so far.
class LrSchedule {
public:
    LrSchedule(ScheduleRegime regime, double initial_lr, std::size_t max_epochs = 128);

    ScheduleDecision update(double validation_loss);

    double learning_rate() const { return lr_; }
    std::size_t epochs() const { return epochs_; }
    std::size_t epochs_since_improvement() const { return since_best_; }
    double best() const { return best_; }

private:
    ScheduleRegime regime_;
    double lr_;
    std::size_t max_epochs_;
    std::size_t epochs_ = 0;
    std::size_t since_best_ = 0;
    double best_;
};

/// Replays a full history of validation losses through a fresh schedule.
ScheduleDecision lr_schedule(ScheduleRegime regime, const std::vector<double>& history, double initial_lr = 1e-3,
                             std::size_t max_epochs = 128);

}  // namespace galattice
