#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "galattice/autodiff.hpp"
#include "galattice/ga.hpp"
#include "galattice/point_cloud.hpp"

namespace testing {

using galattice::Tensor;
using galattice::ga::Multivector;
using galattice::ga::Rotor;

inline Multivector random_multivector(std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Multivector m;
    for (double& c : m.c) c = u(rng);
    return m;
}

inline Multivector random_vector(std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return Multivector::vector(u(rng), u(rng), u(rng));
}

inline Rotor random_rotor(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::array<double, 3> axis{n(rng), n(rng), n(rng)};
    const double len = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    for (double& a : axis) a /= len;
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    return Rotor::from_axis_angle(axis, angle(rng));
}

inline galattice::Vec3 rotate(const Rotor& r, const galattice::Vec3& v) {
    const Multivector m = r.apply(Multivector::vector(v[0], v[1], v[2]));
    return {m[1], m[2], m[3]};
}

inline double max_abs_diff(const Multivector& a, const Multivector& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < 8; ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

inline Tensor random_tensor(galattice::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : t.storage()) v = u(rng);
    return t;
}

inline bool grad_close(double analytic, double numeric, double rtol) {
    return std::abs(analytic - numeric) <= rtol * std::max(std::abs(analytic), std::abs(numeric)) + 1e-9;
}

/// Central differences of `loss` with respect to every entry of `x`, which is
/// perturbed in place.
inline std::vector<double> numeric_gradient(Tensor& x, const std::function<double()>& loss, double h = 1e-5) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = loss();
        x[i] = saved - h;
        const double down = loss();
        x[i] = saved;
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

/// Reduces any node to a scalar through a fixed random projection so every
/// output entry contributes a distinct weight to the loss.
inline galattice::autodiff::NodeId project_to_scalar(galattice::autodiff::Graph& g, galattice::autodiff::NodeId y,
                                                     std::mt19937_64& rng) {
    namespace ad = galattice::autodiff;
    const std::size_t n = galattice::shape_size(g.shape(y));
    const ad::NodeId flat = ad::reshape(g, y, {n});
    const ad::NodeId w = g.constant(random_tensor({n}, rng));
    return ad::sum(g, ad::mul(g, flat, w), 0);
}

/// Gaussian bonds with random types.
inline galattice::PointCloud gaussian_cloud(std::size_t k, std::mt19937_64& rng, std::size_t n_types = 4,
                                            double spread = 0.6) {
    std::normal_distribution<double> n(0.0, spread);
    std::uniform_int_distribution<int> t(0, static_cast<int>(n_types) - 1);
    galattice::PointCloud c;
    for (std::size_t i = 0; i < k; ++i) {
        c.bonds.emplace_back(n(rng), n(rng), n(rng));
        c.types.push_back(t(rng));
    }
    return c;
}

inline galattice::Mat3 rotor_matrix(const Rotor& r) {
    galattice::Mat3 m;
    for (int c = 0; c < 3; ++c) m.col(c) = rotate(r, galattice::Vec3::Unit(c));
    return m;
}

}  // namespace testing
