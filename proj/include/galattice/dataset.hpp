#pragma once

// Point-cloud datasets.
//
// Manifest (text):
//   galattice-dataset 1
//   seed <global seed>
//   k <bonds per cloud>
//   validation_fraction <f>
//   payload <file name of the payload, relative to the manifest>
//   classes <n> then one "class <index> <name>" line each
//   records <n> then one "record <i> <source> <noise> <replica> <particle> <class> <train|val> <seed>" line each
//   end
// Payload: "GALADAT1", uint64 rank, uint64 extents, then little-endian doubles
// of shape [records, k, 4] holding x, y, z and the neighbor type per bond.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "galattice/point_cloud.hpp"
#include "galattice/structure.hpp"

namespace galattice::data {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CloudRecord {
    std::string source;
    double noise = 0.0;
    std::size_t replica = 0;
    std::size_t particle = 0;
    std::size_t label = 0;
    bool validation = false;
    std::uint64_t seed = 0;
};

struct CloudDataset {
    std::uint64_t seed = 0;
    std::size_t k = 20;
    double validation_fraction = 0.3;
    std::vector<std::string> class_names;
    std::vector<PointCloud> clouds;
    std::vector<CloudRecord> records;

    std::size_t size() const { return clouds.size(); }
    std::size_t n_classes() const { return class_names.size(); }
    std::vector<std::size_t> train_indices() const;
    std::vector<std::size_t> validation_indices() const;
};

struct DatasetSpec {
    std::vector<std::string> prototypes = {"cP1-Po", "cI2-W", "cF4-Cu", "cF8-C", "hP2-Mg"};
    std::vector<std::filesystem::path> structure_files;
    std::vector<double> noise_levels = {1e-2};
    std::size_t replicas = 1;
    std::size_t clouds_per_class = 1000;
    std::size_t k = 20;
    std::size_t min_particles = 4096;
    double validation_fraction = 0.3;
    std::uint64_t seed = 0;
};

/// One labeled source configuration.
struct LabeledConfiguration {
    std::string source;
    double noise = 0.0;
    std::size_t replica = 0;
    std::size_t label = 0;
    structure::Configuration config;
};

/// Samples `clouds_per_source[i]` distinct particles of every source and
/// extracts their k-NN clouds, then assigns a seeded train/validation split.
CloudDataset dataset_from_configurations(const std::vector<LabeledConfiguration>& sources,
                                         const std::vector<std::size_t>& clouds_per_source,
                                         std::vector<std::string> class_names, std::size_t k, double validation_fraction,
                                         std::uint64_t seed, std::size_t threads = 1);

/// One class per prototype (built-ins first, then structure files). Clouds of a
/// class are spread evenly over noise levels x replicas.
CloudDataset generate_dataset(const DatasetSpec& spec, std::size_t threads = 1);

/// Writes `<stem>.manifest` and `<stem>.bin`; returns the manifest path.
std::filesystem::path save_dataset(const CloudDataset& data, const std::filesystem::path& stem);
CloudDataset load_dataset(const std::filesystem::path& manifest);

/// Splits `n` items, `fraction` of them (rounded) to validation, by a seeded shuffle.
std::vector<bool> split_assignment(std::size_t n, double fraction, std::uint64_t seed);

}  // namespace galattice::data
