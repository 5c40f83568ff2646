#include "galattice/ga.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace galattice::ga {

Multivector Multivector::scalar(double s) {
    Multivector m;
    m.c[0] = s;
    return m;
}

Multivector Multivector::vector(double x, double y, double z) {
    Multivector m;
    m.c[1] = x;
    m.c[2] = y;
    m.c[3] = z;
    return m;
}

Multivector Multivector::bivector(double e12, double e13, double e23) {
    Multivector m;
    m.c[4] = e12;
    m.c[5] = e13;
    m.c[6] = e23;
    return m;
}

Multivector Multivector::pseudoscalar(double t) {
    Multivector m;
    m.c[7] = t;
    return m;
}

Multivector Multivector::basis(std::size_t slot, double value) {
    if (slot >= kComponents) throw std::out_of_range("multivector basis slot out of range");
    Multivector m;
    m.c[slot] = value;
    return m;
}

double Multivector::vector_norm() const { return std::sqrt(c[1] * c[1] + c[2] * c[2] + c[3] * c[3]); }

double Multivector::bivector_norm() const { return std::sqrt(c[4] * c[4] + c[5] * c[5] + c[6] * c[6]); }

double Multivector::norm() const {
    double s = 0.0;
    for (double x : c) s += x * x;
    return std::sqrt(s);
}

bool Multivector::is_finite() const {
    for (double x : c)
        if (!std::isfinite(x)) return false;
    return true;
}

Multivector& Multivector::operator+=(const Multivector& o) {
    for (std::size_t i = 0; i < kComponents; ++i) c[i] += o.c[i];
    return *this;
}

Multivector& Multivector::operator-=(const Multivector& o) {
    for (std::size_t i = 0; i < kComponents; ++i) c[i] -= o.c[i];
    return *this;
}

Multivector& Multivector::operator*=(double s) {
    for (double& x : c) x *= s;
    return *this;
}

Multivector operator+(Multivector a, const Multivector& b) { return a += b; }
Multivector operator-(Multivector a, const Multivector& b) { return a -= b; }
Multivector operator*(double s, Multivector a) { return a *= s; }
Multivector operator*(Multivector a, double s) { return a *= s; }

Multivector geometric_product(const Multivector& a, const Multivector& b) {
    Multivector out;
    for (std::size_t p = 0; p < kComponents; ++p) {
        if (a.c[p] == 0.0) continue;
        for (std::size_t q = 0; q < kComponents; ++q)
            out.c[kProduct.slot[p][q]] += kProduct.sign[p][q] * a.c[p] * b.c[q];
    }
    return out;
}

Multivector grade(const Multivector& a, int k) {
    if (k < 0 || k > 3) throw std::invalid_argument("invalid grade index " + std::to_string(k));
    Multivector out;
    for (std::size_t i = 0; i < kComponents; ++i)
        if (kBladeGrade[i] == k) out.c[i] = a.c[i];
    return out;
}

Multivector reverse(const Multivector& a) {
    Multivector out = a;
    for (std::size_t i = 4; i < kComponents; ++i) out.c[i] = -out.c[i];
    return out;
}

Invariants invariants(const Multivector& a) {
    return {a.scalar_part(), a.vector_norm(), a.bivector_norm(), a.trivector_part()};
}

InvariantTuple invariants_pair(const Multivector& a, const Multivector& b) {
    const Invariants ia = invariants(a);
    const Invariants ib = invariants(b);
    const Invariants ip = invariants(geometric_product(a, b));
    InvariantTuple out{};
    for (std::size_t i = 0; i < 4; ++i) {
        out[i] = ia[i];
        out[4 + i] = ib[i];
        out[8 + i] = ip[i];
    }
    return out;
}

Rotor::Rotor(double s, double b12, double b13, double b23) {
    const double n = std::sqrt(s * s + b12 * b12 + b13 * b13 + b23 * b23);
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("rotor components have zero norm");
    m_ = Multivector::scalar(s / n) + Multivector::bivector(b12 / n, b13 / n, b23 / n);
}

Rotor Rotor::from_axis_angle(const std::array<double, 3>& axis, double angle) {
    const double len = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (std::abs(len - 1.0) > 1e-9) throw std::invalid_argument("rotation axis is not a unit vector");
    // R = cos(t/2) - sin(t/2) I n, with I n = n1 e23 - n2 e13 + n3 e12
    const double c = std::cos(0.5 * angle);
    const double s = std::sin(0.5 * angle);
    Rotor r;
    r.m_ = Multivector::scalar(c) + Multivector::bivector(-s * axis[2], s * axis[1], -s * axis[0]);
    return r;
}

Rotor Rotor::reversed() const {
    Rotor r;
    r.m_ = reverse(m_);
    return r;
}

Rotor Rotor::compose(const Rotor& first) const {
    const Multivector p = geometric_product(m_, first.m_);
    return Rotor(p.c[0], p.c[4], p.c[5], p.c[6]);
}

Multivector Rotor::apply(const Multivector& a) const {
    return geometric_product(geometric_product(m_, a), reverse(m_));
}

std::array<double, 9> Rotor::matrix() const {
    std::array<double, 9> out{};
    for (std::size_t col = 0; col < 3; ++col) {
        const Multivector img = apply(Multivector::basis(col + 1));
        for (std::size_t row = 0; row < 3; ++row) out[row * 3 + col] = img.c[row + 1];
    }
    return out;
}

Rotor rotor_from_axis_angle(const std::array<double, 3>& axis, double angle) {
    return Rotor::from_axis_angle(axis, angle);
}

Multivector apply_rotor(const Rotor& r, const Multivector& a) { return r.apply(a); }

std::string to_string(const Multivector& a) {
    std::ostringstream os;
    os.precision(17);
    os << "(";
    for (std::size_t i = 0; i < kComponents; ++i) os << (i ? ", " : "") << a.c[i];
    os << ")";
    return os.str();
}

}  // namespace galattice::ga
