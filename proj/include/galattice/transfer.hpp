#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "galattice/checkpoint.hpp"
#include "galattice/dataset.hpp"
#include "galattice/trainer.hpp"

namespace galattice::transfer {

inline constexpr std::array<double, 5> kFractions = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};

enum class Arm { Frozen, FineTune, Scratch };

std::string_view arm_name(Arm arm);
Arm parse_arm(std::string_view name);

/// True when `fraction` is one of kFractions.
bool valid_fraction(double fraction);

/// max(1, floor(fraction * n)). Throws on n = 0 or a fraction outside (0, 1].
std::size_t subset_size(double fraction, std::size_t n);

/// Uniform draw without replacement of subset_size(fraction, |pool|) entries,
/// returned in pool order.
std::vector<std::size_t> sample_subset(const std::vector<std::size_t>& pool, double fraction, std::uint64_t seed);

struct TransferSpec {
    std::optional<TaskKind> source;  // empty for the scratch arm
    TaskKind target = TaskKind::FrameClassification;
    double fraction = 1.0;
    Arm arm = Arm::FineTune;
    std::size_t replicas = 10;
    std::uint64_t seed = 0;
};

/// Throws std::invalid_argument on an unknown fraction, zero replicas or an
/// arm / source combination that does not exist.
void validate(const TransferSpec& spec);

struct TransferRow {
    std::string source;  // task id or "scratch"
    TaskKind target = TaskKind::FrameClassification;
    double fraction = 1.0;
    Arm arm = Arm::FineTune;
    std::size_t replica = 0;
    double best_metric = 0.0;
};

struct TransferResult {
    TransferSpec spec;
    std::vector<double> best_metric;  // one per replica
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Sample mean and sample standard deviation / sqrt(n); the error is 0 for n = 1.
std::pair<double, double> mean_and_standard_error(const std::vector<double>& values);

/// Seeds shared by every arm of one (target, fraction, replica) cell.
std::uint64_t subset_seed(std::uint64_t seed, TaskKind target, double fraction, std::size_t replica);
std::uint64_t head_seed(std::uint64_t seed, TaskKind target, double fraction, std::size_t replica);
std::uint64_t pretrain_seed(std::uint64_t seed, TaskKind task);

struct Setup {
    net::NetConfig net;
    HeadConfig head;            // n_classes is taken from the dataset
    train::TrainConfig pretrain;
    train::TrainConfig finetune;
};

/// Trains `task` from scratch on the dataset's training split and saves the
/// result to `checkpoint` when it is not empty.
ModelParams pretrain(TaskKind task, const data::CloudDataset& data, const Setup& setup, std::uint64_t seed,
                     const std::filesystem::path& checkpoint = {});

/// One replica of one cell. `source` is ignored for the scratch arm and must
/// carry spec.source otherwise. The parameters after the last epoch go to
/// `trained` when given.
TransferRow fine_tune(const ModelParams* source, const TransferSpec& spec, std::size_t replica,
                      const data::CloudDataset& data, const Setup& setup, ModelParams* trained = nullptr);

/// All replicas of one cell.
TransferResult run_cell(const ModelParams* source, const TransferSpec& spec, const data::CloudDataset& data,
                        const Setup& setup);

struct GridSpec {
    std::vector<TaskKind> sources;
    std::vector<TaskKind> targets;
    std::vector<double> fractions{kFractions.begin(), kFractions.end()};
    std::size_t replicas = 3;
    bool scratch = true;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::filesystem::path rows_csv;        // per-replica rows, also the resume log
    std::filesystem::path summary_csv;     // mean and standard error per cell
    std::filesystem::path checkpoint_dir;  // pretrained source checkpoints; reused when present
};

/// targets x fractions x replicas x (2 x sources + scratch).
std::size_t expected_rows(const GridSpec& grid);

/// Runs every missing row of the grid. Rows already present in rows_csv are
/// kept and not recomputed. Returns all rows in canonical order.
std::vector<TransferRow> transfer_matrix(const GridSpec& grid, const data::CloudDataset& data, const Setup& setup);

void write_rows_csv(const std::vector<TransferRow>& rows, const std::filesystem::path& path);
std::vector<TransferRow> read_rows_csv(const std::filesystem::path& path);
void write_summary_csv(const std::vector<TransferRow>& rows, const std::filesystem::path& path);

}  // namespace galattice::transfer
