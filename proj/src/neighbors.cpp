#include "galattice/neighbors.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace galattice::structure {

namespace {

bool candidate_less(double da, std::size_t ia, double db, std::size_t ib) {
    return da < db || (da == db && ia < ib);
}

}  // namespace

NeighborFinder::NeighborFinder(const Configuration& config, std::size_t k, bool force_brute_force)
    : config_(config), k_(k) {
    const std::size_t n = config.size();
    if (k == 0) throw std::invalid_argument("neighbor count k must be positive");
    if (k >= n)
        throw std::invalid_argument("neighbor count k = " + std::to_string(k) + " needs more than " +
                                    std::to_string(n) + " particles");
    if (std::abs(config.box.determinant()) <= 1e-12) throw std::invalid_argument("configuration box is singular");
    inverse_box_ = config.box.inverse();
    if (force_brute_force || n < kCellListThreshold) return;
    // Radius expected to enclose about 2k neighbors at the mean density.
    const double volume = std::abs(config.box.determinant());
    const double r = std::cbrt(3.0 * 2.0 * static_cast<double>(k) * volume / (4.0 * std::numbers::pi * n));
    build_cells(r);
}

void NeighborFinder::build_cells(double cutoff) {
    const Mat3& box = config_.box;
    const double volume = std::abs(box.determinant());
    for (int i = 0; i < 3; ++i) {
        const Vec3 a = box.row((i + 1) % 3).transpose();
        const Vec3 b = box.row((i + 2) % 3).transpose();
        const double width = volume / a.cross(b).norm();
        const auto m = static_cast<std::size_t>(std::floor(width / cutoff));
        if (m < 3) {
            use_cells_ = false;
            return;
        }
        dims_[static_cast<std::size_t>(i)] = m;
    }
    use_cells_ = true;
    cutoff_ = cutoff;
    cells_.assign(dims_[0] * dims_[1] * dims_[2], {});
    cell_of_.resize(config_.size());
    for (std::size_t p = 0; p < config_.size(); ++p) {
        Vec3 f = (config_.positions[p].transpose() * inverse_box_).transpose();
        std::size_t idx = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            double x = f[static_cast<int>(c)] - std::floor(f[static_cast<int>(c)]);
            auto ci = static_cast<std::size_t>(x * static_cast<double>(dims_[c]));
            if (ci >= dims_[c]) ci = dims_[c] - 1;
            idx = idx * dims_[c] + ci;
        }
        cell_of_[p] = idx;
        cells_[idx].push_back(p);
    }
}

std::vector<NeighborFinder::Candidate> NeighborFinder::brute_force(std::size_t center) const {
    std::vector<Candidate> out;
    out.reserve(config_.size() - 1);
    const Vec3& pc = config_.positions[center];
    for (std::size_t j = 0; j < config_.size(); ++j) {
        if (j == center) continue;
        const Vec3 d = minimum_image(config_.box, inverse_box_, config_.positions[j] - pc);
        out.push_back({d.squaredNorm(), j});
    }
    return out;
}

bool NeighborFinder::from_cells(std::size_t center, std::vector<Candidate>& out) const {
    out.clear();
    std::size_t cell = cell_of_[center];
    const std::size_t c2 = cell % dims_[2];
    const std::size_t c1 = (cell / dims_[2]) % dims_[1];
    const std::size_t c0 = cell / (dims_[1] * dims_[2]);
    const Vec3& pc = config_.positions[center];
    const double r2 = cutoff_ * cutoff_;
    auto shift = [](std::size_t c, int d, std::size_t m) {
        return (c + m + static_cast<std::size_t>(d + 1) - 1) % m;  // (c + d) mod m
    };
    for (int d0 = -1; d0 <= 1; ++d0)
        for (int d1 = -1; d1 <= 1; ++d1)
            for (int d2 = -1; d2 <= 1; ++d2) {
                const std::size_t idx =
                    (shift(c0, d0, dims_[0]) * dims_[1] + shift(c1, d1, dims_[1])) * dims_[2] + shift(c2, d2, dims_[2]);
                for (std::size_t j : cells_[idx]) {
                    if (j == center) continue;
                    const Vec3 d = minimum_image(config_.box, inverse_box_, config_.positions[j] - pc);
                    const double dd = d.squaredNorm();
                    if (dd <= r2) out.push_back({dd, j});
                }
            }
    return out.size() >= k_;
}

std::vector<std::size_t> NeighborFinder::neighbors(std::size_t center) const {
    if (center >= config_.size())
        throw std::invalid_argument("center index " + std::to_string(center) + " out of range");
    std::vector<Candidate> cand;
    if (!use_cells_ || !from_cells(center, cand)) cand = brute_force(center);
    auto less = [](const Candidate& a, const Candidate& b) { return candidate_less(a.d2, a.index, b.d2, b.index); };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k_), cand.end(), less);
    std::vector<std::size_t> out(k_);
    for (std::size_t i = 0; i < k_; ++i) out[i] = cand[i].index;
    return out;
}

PointCloud NeighborFinder::cloud(std::size_t center) const {
    PointCloud pc;
    const Vec3& c = config_.positions[center];
    for (std::size_t j : neighbors(center)) {
        pc.bonds.push_back(minimum_image(config_.box, inverse_box_, config_.positions[j] - c));
        pc.types.push_back(config_.species.empty() ? 0 : config_.species[j]);
    }
    return pc;
}

PointCloud knn_cloud(const Configuration& config, std::size_t center, std::size_t k) {
    if (center >= config.size())
        throw std::invalid_argument("center index " + std::to_string(center) + " out of range");
    return NeighborFinder(config, k, true).cloud(center);
}

std::vector<PointCloud> all_clouds(const Configuration& config, std::size_t k) {
    NeighborFinder finder(config, k);
    std::vector<PointCloud> out;
    out.reserve(config.size());
    for (std::size_t i = 0; i < config.size(); ++i) out.push_back(finder.cloud(i));
    return out;
}

}  // namespace galattice::structure
