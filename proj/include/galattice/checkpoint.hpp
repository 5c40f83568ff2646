#pragma once

// Model checkpoints.
//
// File layout:
//   GALA1\n
//   text manifest, one "key value" per line:
//     version, task, classes, latent, tokens, width, hidden, blocks, types,
//     params <count>, then one "<name> <rank> <extents...>" line per parameter,
//     terminated by a line "end"
//   payload: every parameter value as a little-endian IEEE-754 double, in
//   manifest order.

#include <cstdint>
#include <filesystem>
#include <stdexcept>

#include "galattice/attention.hpp"
#include "galattice/params.hpp"
#include "galattice/task_kind.hpp"

namespace galattice {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct HeadConfig {
    std::size_t n_classes = 0;       // frame classification
    std::size_t latent = 8;          // autoencoder latent width
    std::size_t decoder_tokens = 20; // autoencoder output points
};

struct ModelParams {
    TaskKind task = TaskKind::FrameClassification;
    std::uint32_t version = kCheckpointVersion;
    net::NetConfig net;
    HeadConfig head;
    ParameterStore params;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace galattice
