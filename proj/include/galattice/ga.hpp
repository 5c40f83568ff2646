#pragma once

// Euclidean geometric algebra of 3D space.
//
// Components are stored in the fixed basis order
//   (1, e1, e2, e3, e12, e13, e23, e123)
// and every serialization in the project uses that order.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace galattice::ga {

inline constexpr std::size_t kComponents = 8;

/// Bitmask of the basis blade stored at each component slot (e1 = 1, e2 = 2, e3 = 4).
inline constexpr std::array<std::uint8_t, kComponents> kBladeMask = {0, 1, 2, 4, 3, 5, 6, 7};

/// Grade of each component slot.
inline constexpr std::array<int, kComponents> kBladeGrade = {0, 1, 1, 1, 2, 2, 2, 3};

namespace detail {

constexpr int slot_of_mask(std::uint8_t mask) {
    for (std::size_t i = 0; i < kComponents; ++i)
        if (kBladeMask[i] == mask) return static_cast<int>(i);
    return -1;
}

// Sign picked up when reordering the concatenated generator lists of two
// blades into canonical order; all generators square to +1.
constexpr int reorder_sign(std::uint8_t a, std::uint8_t b) {
    int swaps = 0;
    for (int i = 0; i < 3; ++i) {
        if (!(a & (1u << i))) continue;
        for (int j = 0; j < i; ++j)
            if (b & (1u << j)) ++swaps;
    }
    return (swaps % 2) ? -1 : 1;
}

struct ProductTable {
    std::array<std::array<int, kComponents>, kComponents> slot{};
    std::array<std::array<int, kComponents>, kComponents> sign{};
};

constexpr ProductTable make_product_table() {
    ProductTable t{};
    for (std::size_t p = 0; p < kComponents; ++p)
        for (std::size_t q = 0; q < kComponents; ++q) {
            t.slot[p][q] = slot_of_mask(kBladeMask[p] ^ kBladeMask[q]);
            t.sign[p][q] = reorder_sign(kBladeMask[p], kBladeMask[q]);
        }
    return t;
}

}  // namespace detail

/// e_p * e_q = sign[p][q] * e_{slot[p][q]}
inline constexpr detail::ProductTable kProduct = detail::make_product_table();

struct Multivector {
    std::array<double, kComponents> c{};

    static Multivector scalar(double s);
    static Multivector vector(double x, double y, double z);
    static Multivector bivector(double e12, double e13, double e23);
    static Multivector pseudoscalar(double t);
    /// Single basis blade by component slot.
    static Multivector basis(std::size_t slot, double value = 1.0);

    double& operator[](std::size_t i) { return c[i]; }
    double operator[](std::size_t i) const { return c[i]; }

    double scalar_part() const { return c[0]; }
    double vector_norm() const;
    double bivector_norm() const;
    double trivector_part() const { return c[7]; }
    /// Euclidean norm of all eight components.
    double norm() const;
    bool is_finite() const;

    Multivector& operator+=(const Multivector& o);
    Multivector& operator-=(const Multivector& o);
    Multivector& operator*=(double s);

    friend bool operator==(const Multivector&, const Multivector&) = default;
};

Multivector operator+(Multivector a, const Multivector& b);
Multivector operator-(Multivector a, const Multivector& b);
Multivector operator*(double s, Multivector a);
Multivector operator*(Multivector a, double s);

Multivector geometric_product(const Multivector& a, const Multivector& b);

/// Grade-k projection; throws std::invalid_argument unless 0 <= k <= 3.
Multivector grade(const Multivector& a, int k);

/// Reversion: negates grades 2 and 3.
Multivector reverse(const Multivector& a);

/// (scalar, |vector|, |bivector|, trivector) of a single multivector.
using Invariants = std::array<double, 4>;
Invariants invariants(const Multivector& a);

/// Invariants of a, of b and of their geometric product, concatenated.
using InvariantTuple = std::array<double, 12>;
InvariantTuple invariants_pair(const Multivector& a, const Multivector& b);

/// Unit even-grade element s + b12 e12 + b13 e13 + b23 e23.
class Rotor {
public:
    Rotor() = default;
    /// Normalizes the given components; throws std::invalid_argument on zero norm.
    Rotor(double s, double b12, double b13, double b23);

    static Rotor from_axis_angle(const std::array<double, 3>& axis, double angle);

    const Multivector& as_multivector() const { return m_; }
    Rotor reversed() const;
    /// Rotation that applies `first` and then `this`.
    Rotor compose(const Rotor& first) const;
    /// Sandwich product r a r~.
    Multivector apply(const Multivector& a) const;

    /// Equivalent 3x3 rotation matrix (row-major), acting on column vectors.
    std::array<double, 9> matrix() const;

private:
    Multivector m_ = Multivector::scalar(1.0);
};

Rotor rotor_from_axis_angle(const std::array<double, 3>& axis, double angle);
Multivector apply_rotor(const Rotor& r, const Multivector& a);

std::string to_string(const Multivector& a);

}  // namespace galattice::ga
