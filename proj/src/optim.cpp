#include "galattice/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace galattice {

OptimizerState::OptimizerState(const ParameterStore& params, AdamConfig cfg) : config(cfg), accumulated(params) {
    first_moment.reserve(params.size());
    second_moment.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        first_moment.emplace_back(params.value(i).shape());
        second_moment.emplace_back(params.value(i).shape());
    }
}

void accumulate(OptimizerState& state, const Gradients& batch_sum, std::size_t samples) {
    state.accumulated += batch_sum;
    state.accumulated_samples += samples;
    state.accumulated_batches += 1;
}

void adam_step(OptimizerState& state, ParameterStore& params, const Gradients& grads) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size())
        throw std::invalid_argument("adam_step: gradient/parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (grads[i].shape() != params.value(i).shape())
            throw std::invalid_argument("adam_step: gradient shape " + shape_string(grads[i].shape()) +
                                        " does not match parameter '" + params.name(i) + "' " +
                                        shape_string(params.value(i).shape()));

    state.step += 1;
    const auto& c = state.config;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params.trainable(i)) continue;
        auto& p = params.value(i).storage();
        auto& m = state.first_moment[i].storage();
        auto& v = state.second_moment[i].storage();
        const auto& g = grads[i].storage();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
        }
    }
}

bool apply_accumulated(OptimizerState& state, ParameterStore& params) {
    if (state.accumulated_samples == 0) return false;
    state.accumulated.scale(1.0 / static_cast<double>(state.accumulated_samples));
    adam_step(state, params, state.accumulated);
    state.accumulated.zero();
    state.accumulated_samples = 0;
    state.accumulated_batches = 0;
    return true;
}

LrSchedule::LrSchedule(ScheduleRegime regime, double initial_lr, std::size_t max_epochs)
    : regime_(regime), lr_(initial_lr), max_epochs_(max_epochs), best_(std::numeric_limits<double>::infinity()) {}

ScheduleDecision LrSchedule::update(double validation_loss) {
    ++epochs_;
    ScheduleDecision d;
    if (validation_loss < best_) {
        best_ = validation_loss;
        since_best_ = 0;
        d.improved = true;
    } else {
        ++since_best_;
        if (regime_ == ScheduleRegime::Static) {
            lr_ *= 0.5;
            d.stop = since_best_ >= 2;
        } else {
            if (since_best_ % 4 == 0) lr_ *= 0.5;
            d.stop = since_best_ >= 10;
        }
    }
    if (epochs_ >= max_epochs_) d.stop = true;
    d.learning_rate = lr_;
    return d;
}

ScheduleDecision lr_schedule(ScheduleRegime regime, const std::vector<double>& history, double initial_lr,
                             std::size_t max_epochs) {
    LrSchedule s(regime, initial_lr, max_epochs);
    ScheduleDecision d{initial_lr, false, false};
    for (double loss : history) {
        d = s.update(loss);
        if (d.stop) break;
    }
    return d;
}

}  // namespace galattice
