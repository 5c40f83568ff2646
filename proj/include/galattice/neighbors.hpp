#pragma once

#include <cstddef>
#include <vector>

#include "galattice/point_cloud.hpp"
#include "galattice/structure.hpp"

namespace galattice::structure {

/// k nearest neighbors of every particle under the minimum-image convention.
/// Neighbors are ordered by distance with ties broken by particle index.
/// Uses a cell list for n >= kCellListThreshold and brute force below it.
class NeighborFinder {
public:
    static constexpr std::size_t kCellListThreshold = 512;

    NeighborFinder(const Configuration& config, std::size_t k, bool force_brute_force = false);

    /// Indices of the k nearest neighbors of `center`.
    std::vector<std::size_t> neighbors(std::size_t center) const;
    /// Bond vectors (neighbor minus center) and neighbor species.
    PointCloud cloud(std::size_t center) const;

    bool uses_cell_list() const { return use_cells_; }
    std::size_t k() const { return k_; }

private:
    struct Candidate {
        double d2;
        std::size_t index;
    };

    std::vector<Candidate> brute_force(std::size_t center) const;
    bool from_cells(std::size_t center, std::vector<Candidate>& out) const;
    void build_cells(double cutoff);

    const Configuration& config_;
    std::size_t k_;
    Mat3 inverse_box_;
    bool use_cells_ = false;
    double cutoff_ = 0.0;
    std::array<std::size_t, 3> dims_{};
    std::vector<std::size_t> cell_of_;
    std::vector<std::vector<std::size_t>> cells_;
};

/// Throws std::invalid_argument when k >= n or the center index is out of range.
PointCloud knn_cloud(const Configuration& config, std::size_t center, std::size_t k);
/// Clouds of every particle, in particle order.
std::vector<PointCloud> all_clouds(const Configuration& config, std::size_t k);

}  // namespace galattice::structure
