#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "galattice/tensor.hpp"

namespace galattice {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Neighbor-relative bond vectors of one particle (center at the origin) and
/// the type index of each neighbor.
struct PointCloud {
    std::vector<Vec3> bonds;
    std::vector<int> types;

    std::size_t size() const { return bonds.size(); }
};

/// Throws std::invalid_argument unless k >= min_bonds, bonds are finite and types align.
void validate_cloud(const PointCloud& cloud, std::size_t min_bonds = 2);

/// [k, 8] multivector rows holding the bonds as pure vectors.
Tensor bonds_as_multivectors(const PointCloud& cloud);
/// [k, n_types] one-hot rows; throws if a type index is out of range.
Tensor types_one_hot(const PointCloud& cloud, std::size_t n_types);
/// [k, 3] rows of bond coordinates.
Tensor bonds_as_matrix(const std::vector<Vec3>& bonds);

}  // namespace galattice
