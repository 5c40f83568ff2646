#include "galattice/structure.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>

#include "galattice/random.hpp"

namespace galattice {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x243f6a8885a308d3ull;
    for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

std::uint64_t derive_seed(std::uint64_t global, std::string_view name, double noise, std::uint64_t replica) {
    std::uint64_t noise_bits = 0;
    static_assert(sizeof(noise_bits) == sizeof(noise));
    std::memcpy(&noise_bits, &noise, sizeof noise);
    return mix_seed({global, hash_string(name), noise_bits, replica});
}

namespace structure {

namespace {

struct Prototype {
    std::string name;
    Mat3 lattice;
    std::vector<Vec3> basis;
};

Mat3 cubic() { return Mat3::Identity(); }

Mat3 tetragonal(double c_over_a) {
    Mat3 m = Mat3::Identity();
    m(2, 2) = c_over_a;
    return m;
}

Mat3 hexagonal(double c_over_a) {
    Mat3 m = Mat3::Zero();
    m.row(0) << 1.0, 0.0, 0.0;
    m.row(1) << -0.5, std::sqrt(3.0) / 2.0, 0.0;
    m.row(2) << 0.0, 0.0, c_over_a;
    return m;
}

double wrap01(double x) {
    double f = x - std::floor(x);
    if (f >= 1.0) f -= 1.0;
    // Snap values indistinguishable from a lattice point.
    if (std::abs(f) < 1e-12 || std::abs(f - 1.0) < 1e-12) f = 0.0;
    return f;
}

Vec3 wrap01(const Vec3& v) { return {wrap01(v[0]), wrap01(v[1]), wrap01(v[2])}; }

void add_unique(std::vector<Vec3>& sites, const Vec3& p) {
    const Vec3 w = wrap01(p);
    for (const Vec3& s : sites) {
        Vec3 d = s - w;
        for (int c = 0; c < 3; ++c) d[c] -= std::round(d[c]);
        if (d.norm() < 1e-9) return;
    }
    sites.push_back(w);
}

std::vector<Vec3> with_centering(const std::vector<Vec3>& sites, const std::vector<Vec3>& shifts) {
    std::vector<Vec3> out;
    for (const Vec3& shift : shifts)
        for (const Vec3& s : sites) add_unique(out, s + shift);
    return out;
}

const std::vector<Vec3> kBodyCentering = {{0, 0, 0}, {0.5, 0.5, 0.5}};
const std::vector<Vec3> kFaceCentering = {{0, 0, 0}, {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}};
const std::vector<Vec3> kBaseCenteringC = {{0, 0, 0}, {0.5, 0.5, 0}};

// Li, I-43d (220) Wyckoff 16c (x, x, x).
std::vector<Vec3> li_cI16(double x) {
    std::vector<Vec3> orbit;
    for (double t : {0.0, 0.25}) {
        const double u = x + t;
        // (u,u,u) under the 2_1 axes of I2_13
        add_unique(orbit, {u, u, u});
        add_unique(orbit, {-u + 0.5, -u, u + 0.5});
        add_unique(orbit, {-u, u + 0.5, -u + 0.5});
        add_unique(orbit, {u + 0.5, -u + 0.5, -u});
    }
    return with_centering(orbit, kBodyCentering);
}

// alpha-Ga, Cmce (64) Wyckoff 8f (0, y, z).
std::vector<Vec3> ga_oC8(double y, double z) {
    const std::vector<Vec3> orbit = {{0, y, z}, {0, -y + 0.5, z + 0.5}, {0, y + 0.5, -z + 0.5}, {0, -y, -z}};
    return with_centering(orbit, kBaseCenteringC);
}

// trigonal Se, P3_121 (152) Wyckoff 3a (x, 0, 1/3).
std::vector<Vec3> se_hP3(double x) {
    std::vector<Vec3> sites;
    add_unique(sites, {x, 0, 1.0 / 3.0});
    add_unique(sites, {0, x, 2.0 / 3.0});
    add_unique(sites, {-x, -x, 0});
    return sites;
}

Prototype make(std::string_view name) {
    if (name == "cP1-Po") return {"cP1-Po", cubic(), {{0, 0, 0}}};
    if (name == "cI2-W") return {"cI2-W", cubic(), kBodyCentering};
    if (name == "cF4-Cu") return {"cF4-Cu", cubic(), kFaceCentering};
    if (name == "cF8-C") return {"cF8-C", cubic(), with_centering({{0, 0, 0}, {0.25, 0.25, 0.25}}, kFaceCentering)};
    if (name == "hP2-Mg")
        return {"hP2-Mg", hexagonal(std::sqrt(8.0 / 3.0)), {{1.0 / 3.0, 2.0 / 3.0, 0.25}, {2.0 / 3.0, 1.0 / 3.0, 0.75}}};
    if (name == "cI16-Li") return {"cI16-Li", cubic(), li_cI16(0.05)};
    if (name == "tI2-In") return {"tI2-In", tetragonal(4.9461 / 3.2523), kBodyCentering};
    if (name == "hP3-Se") return {"hP3-Se", hexagonal(4.9536 / 4.3662), se_hP3(0.2254)};
    if (name == "oC8-Ga") {
        Mat3 m = Mat3::Zero();
        m.diagonal() << 4.5197, 7.6633, 4.5260;
        return {"oC8-Ga", m, ga_oC8(0.1549, 0.0810)};
    }
    if (name == "tI4-Sn")
        return {"tI4-Sn", tetragonal(3.1819 / 5.8318), {{0, 0, 0}, {0, 0.5, 0.25}, {0.5, 0.5, 0.5}, {0.5, 0, 0.75}}};
    throw std::invalid_argument("unknown prototype '" + std::string(name) + "'");
}

// Perpendicular distance between opposite faces of the cell spanned by the rows of m.
std::array<double, 3> face_widths(const Mat3& m) {
    const double vol = std::abs(m.determinant());
    std::array<double, 3> w{};
    for (int i = 0; i < 3; ++i) {
        const Vec3 a = m.row((i + 1) % 3).transpose();
        const Vec3 b = m.row((i + 2) % 3).transpose();
        w[static_cast<std::size_t>(i)] = vol / a.cross(b).norm();
    }
    return w;
}

}  // namespace

void validate(const UnitCell& cell) {
    if (!cell.lattice.allFinite() || std::abs(cell.lattice.determinant()) <= 1e-9)
        throw std::invalid_argument("unit cell '" + cell.name + "' has a singular lattice");
    if (cell.basis.empty()) throw std::invalid_argument("unit cell '" + cell.name + "' has no basis sites");
    if (cell.species.size() != cell.basis.size())
        throw std::invalid_argument("unit cell '" + cell.name + "' has " + std::to_string(cell.species.size()) +
                                    " species for " + std::to_string(cell.basis.size()) + " sites");
    for (const Vec3& f : cell.basis)
        for (int c = 0; c < 3; ++c)
            if (!std::isfinite(f[c]) || f[c] < 0.0 || f[c] >= 1.0)
                throw std::invalid_argument("unit cell '" + cell.name + "' has fractional coordinate " +
                                            std::to_string(f[c]) + " outside [0, 1)");
    for (int s : cell.species)
        if (s < 0) throw std::invalid_argument("unit cell '" + cell.name + "' has a negative species index");
}

const std::vector<std::string>& builtin_prototypes() {
    static const std::vector<std::string> names = {"cP1-Po", "cI2-W",  "cF4-Cu", "cF8-C",  "hP2-Mg",
                                                   "cI16-Li", "tI2-In", "hP3-Se", "oC8-Ga", "tI4-Sn"};
    return names;
}

double nearest_neighbor_distance(const UnitCell& cell) {
    validate(cell);
    // Images within +-2 cells cover the nearest neighbor for any reasonably shaped cell.
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cell.size(); ++i)
        for (std::size_t j = 0; j < cell.size(); ++j)
            for (int a = -2; a <= 2; ++a)
                for (int b = -2; b <= 2; ++b)
                    for (int c = -2; c <= 2; ++c) {
                        if (i == j && a == 0 && b == 0 && c == 0) continue;
                        const Vec3 df = cell.basis[j] - cell.basis[i] + Vec3(a, b, c);
                        const double d = (df.transpose() * cell.lattice).norm();
                        best = std::min(best, d);
                    }
    return best;
}

UnitCell build_prototype(std::string_view name, double nn_distance) {
    if (!(nn_distance > 0.0)) throw std::invalid_argument("nearest-neighbor distance must be positive");
    Prototype p = make(name);
    UnitCell cell;
    cell.name = p.name;
    cell.lattice = p.lattice;
    cell.basis = p.basis;
    cell.species.assign(p.basis.size(), 0);
    const double d = nearest_neighbor_distance(cell);
    cell.lattice *= nn_distance / d;
    return cell;
}

std::array<std::size_t, 3> replication_counts(const UnitCell& cell, std::size_t min_particles) {
    validate(cell);
    const std::size_t target = std::max<std::size_t>(1, min_particles);
    const std::size_t needed_cells = (target + cell.size() - 1) / cell.size();
    const auto w = face_widths(cell.lattice);
    auto product = [](const std::array<std::size_t, 3>& n) { return n[0] * n[1] * n[2]; };
    // Grow the supercell one layer at a time along the axes with the smallest
    // extent; ties grow together so cubic cells stay cubic.
    std::array<std::size_t, 3> n = {1, 1, 1};
    while (product(n) < needed_cells) {
        double smallest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < 3; ++i) smallest = std::min(smallest, static_cast<double>(n[i]) * w[i]);
        for (std::size_t i = 0; i < 3; ++i)
            if (static_cast<double>(n[i]) * w[i] <= smallest * (1.0 + 1e-9)) ++n[i];
    }
    return n;
}

Configuration replicate(const UnitCell& cell, std::size_t min_particles) {
    const auto n = replication_counts(cell, min_particles);
    Configuration cfg;
    cfg.provenance = cell.name;
    for (int r = 0; r < 3; ++r) cfg.box.row(r) = cell.lattice.row(r) * static_cast<double>(n[static_cast<std::size_t>(r)]);
    cfg.positions.reserve(n[0] * n[1] * n[2] * cell.size());
    for (std::size_t a = 0; a < n[0]; ++a)
        for (std::size_t b = 0; b < n[1]; ++b)
            for (std::size_t c = 0; c < n[2]; ++c)
                for (std::size_t s = 0; s < cell.size(); ++s) {
                    const Vec3 frac = cell.basis[s] + Vec3(static_cast<double>(a), static_cast<double>(b),
                                                           static_cast<double>(c));
                    cfg.positions.push_back((frac.transpose() * cell.lattice).transpose());
                    cfg.species.push_back(cell.species[s]);
                }
    return cfg;
}

Vec3 wrap_position(const Mat3& box, const Mat3& inverse_box, const Vec3& p) {
    Vec3 f = (p.transpose() * inverse_box).transpose();
    for (int c = 0; c < 3; ++c) {
        f[c] -= std::floor(f[c]);
        if (f[c] >= 1.0) f[c] = 0.0;
    }
    return (f.transpose() * box).transpose();
}

Vec3 minimum_image(const Mat3& box, const Mat3& inverse_box, const Vec3& d) {
    Vec3 f = (d.transpose() * inverse_box).transpose();
    for (int c = 0; c < 3; ++c) f[c] -= std::round(f[c]);
    Vec3 best = (f.transpose() * box).transpose();
    const bool orthogonal = std::abs(box(0, 1)) + std::abs(box(0, 2)) + std::abs(box(1, 0)) + std::abs(box(1, 2)) +
                                std::abs(box(2, 0)) + std::abs(box(2, 1)) ==
                            0.0;
    if (orthogonal) return best;
    double best_n2 = best.squaredNorm();
    const Vec3 base = best;
    for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
            for (int c = -1; c <= 1; ++c) {
                if (a == 0 && b == 0 && c == 0) continue;
                const Vec3 cand = base + (Vec3(a, b, c).transpose() * box).transpose();
                const double n2 = cand.squaredNorm();
                if (n2 < best_n2) {
                    best_n2 = n2;
                    best = cand;
                }
            }
    return best;
}

Configuration add_thermal_noise(const Configuration& config, double std, std::uint64_t seed) {
    if (!(std >= 0.0)) throw std::invalid_argument("noise standard deviation must be non-negative");
    Configuration out = config;
    if (std == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std);
    const Mat3 inv = config.box.inverse();
    for (Vec3& p : out.positions) {
        for (int c = 0; c < 3; ++c) p[c] += normal(rng);
        p = wrap_position(out.box, inv, p);
    }
    return out;
}

}  // namespace structure
}  // namespace galattice
