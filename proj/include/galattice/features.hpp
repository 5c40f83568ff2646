#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "galattice/point_cloud.hpp"

namespace galattice::features {

inline constexpr int kMaxDegree = 12;

/// Orthonormal complex spherical harmonic with the Condon-Shortley phase.
/// Throws std::invalid_argument for |m| > l, l outside [0, 12] or a non-unit direction.
std::complex<double> sph_harm(int l, int m, const Vec3& direction);

/// Y_lm for l = 0..lmax, m = -l..l, stored at index l*l + l + m.
std::vector<std::complex<double>> sph_harm_all(int lmax, const Vec3& direction);

/// Bonds ordered by length, ties by input index.
std::vector<Vec3> sorted_bonds(const PointCloud& cloud);

/// Steinhardt q_l over the n nearest bonds.
double steinhardt_q(const PointCloud& cloud, int l, std::size_t n_neighbors);

enum class Method { Q, Psi, Radial };

inline constexpr std::size_t kSteinhardtDim = 102;
inline constexpr std::size_t kPsiDim = 2873;
inline constexpr std::size_t kRadialDim = 19;

/// q_l for l in {2, 4, ..., 12} and n in {4..20}, n-major.
std::vector<double> steinhardt_vector(const PointCloud& cloud);

/// |mean Y_lm| of the n nearest bonds in their inertia eigenframe, l = 0..12,
/// n = 4..20. Sets `degenerate` when two eigenvalues of some frame coincide.
std::vector<double> psi_features(const PointCloud& cloud, bool* degenerate = nullptr);

/// |r_n| / |r_1| for n = 2..20.
std::vector<double> radial_features(const PointCloud& cloud);

std::string_view method_name(Method m);
/// Accepts "Q", "Psi", "Radial" (case-insensitive); throws std::invalid_argument otherwise.
Method parse_method(std::string_view name);
std::size_t method_dim(Method m);
std::vector<double> featurize(Method m, const PointCloud& cloud);
/// Rows of one feature vector per cloud.
std::vector<std::vector<double>> featurize_all(Method m, const std::vector<PointCloud>& clouds, std::size_t threads = 1);

/// One row per entry, columns "<prefix>0..", values at precision 17.
void write_matrix_csv(const std::vector<std::vector<double>>& rows, const std::filesystem::path& path,
                      const std::string& prefix = "f");
/// "GALAMAT1", uint64 rank 2, rows, cols, then little-endian doubles.
void write_matrix_binary(const std::vector<std::vector<double>>& rows, const std::filesystem::path& path);

}  // namespace galattice::features
