#pragma once

#include <array>
#include <string>
#include <string_view>

namespace galattice {

enum class TaskKind { Autoencoder, Denoising, FrameClassification, ShiftIdentification, NoisyBond, NearestBond };

inline constexpr std::array<TaskKind, 6> kAllTasks = {TaskKind::FrameClassification, TaskKind::NoisyBond,
                                                      TaskKind::Autoencoder,         TaskKind::Denoising,
                                                      TaskKind::NearestBond,         TaskKind::ShiftIdentification};

/// Short identifier used in files and on the command line ("frame", "noisy", ...).
std::string_view task_id(TaskKind kind);
/// Throws std::invalid_argument naming the id when it is unknown.
TaskKind parse_task(std::string_view id);

/// Classification tasks are scored by 1 - accuracy, geometric ones by mean absolute error.
bool is_classification(TaskKind kind);
/// Static tasks draw from a fixed sample set; dynamic ones regenerate perturbations each epoch.
bool is_static(TaskKind kind);

}  // namespace galattice
