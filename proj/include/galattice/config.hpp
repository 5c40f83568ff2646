#pragma once

// Run configuration: plain "key = value" lines grouped under [section]
// headers. '#' and ';' start comments. Lists are comma-separated.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "galattice/checkpoint.hpp"
#include "galattice/dataset.hpp"
#include "galattice/potentials.hpp"
#include "galattice/trainer.hpp"
#include "galattice/transfer.hpp"

namespace galattice::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EmbedSection {
    std::filesystem::path checkpoint;
};

struct ZeroShotSection {
    std::filesystem::path checkpoint;
    /// "A|B" entries; each side is <source>[@noise[@replica]] where source is a
    /// built-in prototype, a structure file, or <trajectory>:<frame>.
    std::vector<std::string> pairs = {"cF4-Cu@0.05@0|hP2-Mg@0.05@0", "cF4-Cu@0.05@0|cF4-Cu@0.05@1"};
    std::vector<std::string> methods = {"model", "q", "psi", "radial"};
    std::size_t min_particles = 4096;
    std::size_t max_particles = 1000;
};

struct PhaseHistSection {
    std::filesystem::path checkpoint;  // empty: train a classifier on the trajectory
    std::filesystem::path trajectory;
    std::size_t stride = 4;
    std::size_t clouds_per_frame = 500;
    std::size_t max_particles = 0;
};

struct FeaturizeSection {
    std::string method = "q";
    std::string format = "csv";
};

struct TransferSection {
    std::vector<std::string> sources = {"denoising", "nearest"};
    std::vector<std::string> targets = {"frame"};
    std::vector<double> fractions = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    std::size_t replicas = 3;
    bool scratch = true;
    std::size_t pretrain_epochs = 128;
};

struct PotentialSection {
    std::string preset;  // overrides kind and parameters when set
    potentials::PotentialParams params;
    double r_min = 0.8;
    double r_max = 3.0;
    std::size_t points = 221;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::filesystem::path out = "out";

    data::DatasetSpec data;
    std::filesystem::path dataset;  // existing manifest; empty generates from `data`

    net::NetConfig net;
    HeadConfig head;

    TaskKind task = TaskKind::FrameClassification;
    train::TrainConfig train;

    TransferSection transfer;
    EmbedSection embed;
    ZeroShotSection zero_shot;
    PhaseHistSection phase_hist;
    FeaturizeSection featurize;
    PotentialSection potential;
};

/// Every key as "section.key", in resolved-file order.
std::vector<std::string> known_keys();

/// Sets one key from text. Throws ConfigError naming the key when it is
/// unknown or the value does not parse.
void set_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_value(const RunConfig& config, std::string_view key);

/// Applies the lines of `text` on top of `config`. `origin` prefixes diagnostics.
void apply_text(RunConfig& config, std::string_view text, std::string_view origin = "config");
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Resolved form: every key with its effective value.
std::string to_text(const RunConfig& config);
void write_resolved(const RunConfig& config, const std::filesystem::path& path);

}  // namespace galattice::config
