#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "galattice/point_cloud.hpp"

namespace galattice::structure {

/// Lattice rows are the cell vectors a, b, c in sigma0 units; basis entries are
/// fractional coordinates in [0, 1).
struct UnitCell {
    std::string name;
    Mat3 lattice = Mat3::Identity();
    std::vector<Vec3> basis;
    std::vector<int> species;

    std::size_t size() const { return basis.size(); }
};

/// Throws std::invalid_argument on a singular lattice, out-of-range
/// coordinates or misaligned species.
void validate(const UnitCell& cell);

/// Periodic particle configuration. Box rows are the periodic vectors.
struct Configuration {
    Mat3 box = Mat3::Identity();
    std::vector<Vec3> positions;
    std::vector<int> species;
    std::string provenance;

    std::size_t size() const { return positions.size(); }
};

struct TrajectoryFrame {
    std::size_t index = 0;
    std::optional<double> tag;
    Configuration config;
};

/// Names of the built-in prototypes.
const std::vector<std::string>& builtin_prototypes();

/// Standard cell of a built-in prototype with the lattice scaled so the
/// nearest-neighbor distance equals `nn_distance`. Throws on unknown names.
UnitCell build_prototype(std::string_view name, double nn_distance = 1.0);

/// Shortest distance between two distinct sites of the periodic crystal.
double nearest_neighbor_distance(const UnitCell& cell);

/// Replication counts along a, b, c for at least `min_particles` sites.
std::array<std::size_t, 3> replication_counts(const UnitCell& cell, std::size_t min_particles);

/// Tiles the cell with the smallest near-isotropic supercell holding at least `min_particles` sites.
Configuration replicate(const UnitCell& cell, std::size_t min_particles);

/// Adds i.i.d. Gaussian displacements of standard deviation `std` to every
/// coordinate, then wraps positions back into the box.
Configuration add_thermal_noise(const Configuration& config, double std, std::uint64_t seed);

/// Default noise levels in sigma0.
inline constexpr std::array<double, 3> kDefaultNoiseLevels = {1e-2, 3e-2, 5e-2};

Vec3 wrap_position(const Mat3& box, const Mat3& inverse_box, const Vec3& p);
/// Shortest periodic image of a displacement.
Vec3 minimum_image(const Mat3& box, const Mat3& inverse_box, const Vec3& d);

}  // namespace galattice::structure
