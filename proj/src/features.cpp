#include "galattice/features.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "galattice/parallel.hpp"

namespace galattice::features {

namespace {

constexpr std::size_t kMinNeighbors = 4;
constexpr std::size_t kMaxNeighbors = 20;

void check_degree(int l, int m) {
    if (l < 0 || l > kMaxDegree) throw std::invalid_argument("spherical harmonic degree " + std::to_string(l) + " outside [0, 12]");
    if (std::abs(m) > l)
        throw std::invalid_argument("spherical harmonic order |m| = " + std::to_string(std::abs(m)) + " exceeds l = " +
                                    std::to_string(l));
}

// Normalized associated Legendre values N_lm P_l^m(x) for 0 <= m <= l <= lmax
// at index l*(l+1)/2 + m, Condon-Shortley phase included.
std::vector<double> normalized_legendre(int lmax, double x) {
    std::vector<double> p(static_cast<std::size_t>((lmax + 1) * (lmax + 2) / 2));
    auto at = [&](int l, int m) -> double& { return p[static_cast<std::size_t>(l * (l + 1) / 2 + m)]; };
    const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
    double pmm = 1.0;
    for (int m = 0; m <= lmax; ++m) {
        if (m > 0) pmm *= -(2.0 * m - 1.0) * s;
        at(m, m) = pmm;
        if (m < lmax) at(m + 1, m) = x * (2.0 * m + 1.0) * pmm;
        for (int l = m + 2; l <= lmax; ++l)
            at(l, m) = ((2.0 * l - 1.0) * x * at(l - 1, m) - (l + m - 1.0) * at(l - 2, m)) / (l - m);
    }
    for (int l = 0; l <= lmax; ++l)
        for (int m = 0; m <= l; ++m) {
            double ratio = 1.0;  // (l-m)! / (l+m)!
            for (int i = l - m + 1; i <= l + m; ++i) ratio /= i;
            at(l, m) *= std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * ratio);
        }
    return p;
}

Vec3 unit(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 0.0)) throw std::invalid_argument("zero-length bond has no direction");
    return v / n;
}

void require_bonds(const PointCloud& cloud, std::size_t n, const char* what) {
    if (cloud.size() < n)
        throw std::invalid_argument(std::string(what) + " needs " + std::to_string(n) + " bonds, cloud has " +
                                    std::to_string(cloud.size()));
}

// |mean Y_lm| over the directions for all l <= lmax (index l*l + l + m).
std::vector<std::complex<double>> mean_harmonics(const std::vector<Vec3>& bonds, std::size_t n, int lmax) {
    std::vector<std::complex<double>> acc(static_cast<std::size_t>((lmax + 1) * (lmax + 1)));
    for (std::size_t b = 0; b < n; ++b) {
        const auto y = sph_harm_all(lmax, unit(bonds[b]));
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += y[i];
    }
    for (auto& a : acc) a /= static_cast<double>(n);
    return acc;
}

}  // namespace

std::vector<std::complex<double>> sph_harm_all(int lmax, const Vec3& direction) {
    check_degree(lmax, 0);
    if (std::abs(direction.norm() - 1.0) > 1e-9) throw std::invalid_argument("spherical harmonics need a unit direction");
    const double x = std::clamp(direction.z(), -1.0, 1.0);
    const auto p = normalized_legendre(lmax, x);
    const double phi = std::atan2(direction.y(), direction.x());
    std::vector<std::complex<double>> out(static_cast<std::size_t>((lmax + 1) * (lmax + 1)));
    for (int l = 0; l <= lmax; ++l)
        for (int m = 0; m <= l; ++m) {
            const std::complex<double> y = p[static_cast<std::size_t>(l * (l + 1) / 2 + m)] * std::polar(1.0, m * phi);
            out[static_cast<std::size_t>(l * l + l + m)] = y;
            if (m > 0) out[static_cast<std::size_t>(l * l + l - m)] = (m % 2 ? -1.0 : 1.0) * std::conj(y);
        }
    return out;
}

std::complex<double> sph_harm(int l, int m, const Vec3& direction) {
    check_degree(l, m);
    return sph_harm_all(l, direction)[static_cast<std::size_t>(l * l + l + m)];
}

std::vector<Vec3> sorted_bonds(const PointCloud& cloud) {
    std::vector<std::size_t> order(cloud.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cloud.bonds[a].norm() < cloud.bonds[b].norm(); });
    std::vector<Vec3> out;
    out.reserve(order.size());
    for (std::size_t i : order) out.push_back(cloud.bonds[i]);
    return out;
}

double steinhardt_q(const PointCloud& cloud, int l, std::size_t n_neighbors) {
    check_degree(l, 0);
    if (n_neighbors == 0) throw std::invalid_argument("steinhardt_q needs at least one neighbor");
    require_bonds(cloud, n_neighbors, "steinhardt_q");
    const auto mean = mean_harmonics(sorted_bonds(cloud), n_neighbors, l);
    double sum = 0.0;
    for (int m = -l; m <= l; ++m) sum += std::norm(mean[static_cast<std::size_t>(l * l + l + m)]);
    return std::sqrt(4.0 * std::numbers::pi / (2.0 * l + 1.0) * sum);
}

std::vector<double> steinhardt_vector(const PointCloud& cloud) {
    require_bonds(cloud, kMaxNeighbors, "steinhardt_vector");
    const std::vector<Vec3> bonds = sorted_bonds(cloud);
    std::vector<double> out;
    out.reserve(kSteinhardtDim);
    // running sums over the nearest n bonds
    std::vector<std::complex<double>> acc(static_cast<std::size_t>((kMaxDegree + 1) * (kMaxDegree + 1)));
    for (std::size_t n = 1; n <= kMaxNeighbors; ++n) {
        const auto y = sph_harm_all(kMaxDegree, unit(bonds[n - 1]));
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += y[i];
        if (n < kMinNeighbors) continue;
        for (int l = 2; l <= kMaxDegree; l += 2) {
            double sum = 0.0;
            for (int m = -l; m <= l; ++m) sum += std::norm(acc[static_cast<std::size_t>(l * l + l + m)] / static_cast<double>(n));
            out.push_back(std::sqrt(4.0 * std::numbers::pi / (2.0 * l + 1.0) * sum));
        }
    }
    return out;
}

std::vector<double> psi_features(const PointCloud& cloud, bool* degenerate) {
    require_bonds(cloud, kMaxNeighbors, "psi_features");
    const std::vector<Vec3> bonds = sorted_bonds(cloud);
    std::vector<double> out;
    out.reserve(kPsiDim);
    bool any_degenerate = false;
    for (std::size_t n = kMinNeighbors; n <= kMaxNeighbors; ++n) {
        Mat3 inertia = Mat3::Zero();
        for (std::size_t b = 0; b < n; ++b)
            inertia += bonds[b].squaredNorm() * Mat3::Identity() - bonds[b] * bonds[b].transpose();
        const Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia);
        const Vec3 ev = eig.eigenvalues();
        Mat3 frame = eig.eigenvectors();  // columns, ascending eigenvalues
        for (int c = 0; c < 3; ++c) {
            Eigen::Index big = 0;
            frame.col(c).cwiseAbs().maxCoeff(&big);
            if (frame(big, c) < 0.0) frame.col(c) = -frame.col(c);
        }
        if (ev[1] - ev[0] < 1e-9 || ev[2] - ev[1] < 1e-9) {
            any_degenerate = true;
            frame.col(2) = frame.col(0).cross(frame.col(1));
        }
        std::vector<Vec3> local;
        local.reserve(n);
        for (std::size_t b = 0; b < n; ++b) local.push_back(frame.transpose() * bonds[b]);
        const auto mean = mean_harmonics(local, n, kMaxDegree);
        for (const auto& v : mean) out.push_back(std::abs(v));
    }
    if (degenerate) *degenerate = any_degenerate;
    return out;
}

std::vector<double> radial_features(const PointCloud& cloud) {
    require_bonds(cloud, kMaxNeighbors, "radial_features");
    std::vector<double> r;
    for (const Vec3& b : cloud.bonds) r.push_back(b.norm());
    std::sort(r.begin(), r.end());
    if (r[0] < 1e-12) throw std::invalid_argument("radial_features: nearest bond has zero length");
    std::vector<double> out;
    for (std::size_t n = 1; n < kMaxNeighbors; ++n) out.push_back(r[n] / r[0]);
    return out;
}

std::string_view method_name(Method m) {
    switch (m) {
        case Method::Q: return "Q";
        case Method::Psi: return "Psi";
        case Method::Radial: return "Radial";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    std::string lower(name);
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "q") return Method::Q;
    if (lower == "psi") return Method::Psi;
    if (lower == "radial") return Method::Radial;
    throw std::invalid_argument("unknown feature method '" + std::string(name) + "'");
}

std::size_t method_dim(Method m) {
    switch (m) {
        case Method::Q: return kSteinhardtDim;
        case Method::Psi: return kPsiDim;
        case Method::Radial: return kRadialDim;
    }
    return 0;
}

std::vector<double> featurize(Method m, const PointCloud& cloud) {
    switch (m) {
        case Method::Q: return steinhardt_vector(cloud);
        case Method::Psi: return psi_features(cloud);
        case Method::Radial: return radial_features(cloud);
    }
    return {};
}

std::vector<std::vector<double>> featurize_all(Method m, const std::vector<PointCloud>& clouds, std::size_t threads) {
    std::vector<std::vector<double>> rows(clouds.size());
    parallel_for(clouds.size(), threads, [&](std::size_t i, std::size_t) { rows[i] = featurize(m, clouds[i]); });
    return rows;
}

void write_matrix_csv(const std::vector<std::vector<double>>& rows, const std::filesystem::path& path,
                      const std::string& prefix) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << std::setprecision(17);
    const std::size_t cols = rows.empty() ? 0 : rows[0].size();
    for (std::size_t c = 0; c < cols; ++c) os << (c ? "," : "") << prefix << c;
    os << '\n';
    for (const auto& r : rows) {
        if (r.size() != cols) throw std::invalid_argument("ragged feature matrix");
        for (std::size_t c = 0; c < cols; ++c) os << (c ? "," : "") << r[c];
        os << '\n';
    }
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

void write_matrix_binary(const std::vector<std::vector<double>>& rows, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    auto put = [&](std::uint64_t v) {
        char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
        os.write(buf, 8);
    };
    os.write("GALAMAT1", 8);
    const std::size_t cols = rows.empty() ? 0 : rows[0].size();
    put(2);
    put(rows.size());
    put(cols);
    for (const auto& r : rows) {
        if (r.size() != cols) throw std::invalid_argument("ragged feature matrix");
        for (double v : r) put(std::bit_cast<std::uint64_t>(v));
    }
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace galattice::features
