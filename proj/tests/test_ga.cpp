#include <complex>

#include "galattice/ga.hpp"
#include "helpers.hpp"

using namespace galattice::ga;
using testing::max_abs_diff;
using testing::random_multivector;
using testing::random_rotor;

namespace {

// Pauli-matrix representation of the algebra, used as an independent product oracle.
using C = std::complex<double>;
using M2 = std::array<C, 4>;  // row-major 2x2

M2 mm(const M2& a, const M2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

const C I1{0.0, 1.0};
const M2 kId{1.0, 0.0, 0.0, 1.0};
const M2 kSx{0.0, 1.0, 1.0, 0.0};
const M2 kSy{0.0, -I1, I1, 0.0};
const M2 kSz{1.0, 0.0, 0.0, -1.0};

M2 to_pauli(const Multivector& m) {
    // 1, sx, sy, sz, e12 = i sz, e13 = -i sy, e23 = i sx, e123 = i
    M2 out{};
    auto add = [&](const M2& basis, C coeff) {
        for (int i = 0; i < 4; ++i) out[i] += coeff * basis[i];
    };
    add(kId, m[0]);
    add(kSx, m[1]);
    add(kSy, m[2]);
    add(kSz, m[3]);
    add(kSz, I1 * m[4]);
    add(kSy, -I1 * m[5]);
    add(kSx, I1 * m[6]);
    add(kId, I1 * m[7]);
    return out;
}

Multivector from_pauli(const M2& p) {
    auto coeff = [&](const M2& s) {
        const M2 q = mm(p, s);
        return (q[0] + q[3]) / 2.0;
    };
    const C a0 = coeff(kId), a1 = coeff(kSx), a2 = coeff(kSy), a3 = coeff(kSz);
    Multivector m;
    m[0] = a0.real();
    m[1] = a1.real();
    m[2] = a2.real();
    m[3] = a3.real();
    m[4] = a3.imag();
    m[5] = -a2.imag();
    m[6] = a1.imag();
    m[7] = a0.imag();
    return m;
}

// Rodrigues rotation of a column vector.
std::array<double, 3> rodrigues(const std::array<double, 3>& k, double angle, const std::array<double, 3>& v) {
    const double c = std::cos(angle), s = std::sin(angle);
    const double kv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    const std::array<double, 3> kxv = {k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]};
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) out[i] = v[i] * c + kxv[i] * s + k[i] * kv * (1 - c);
    return out;
}

}  // namespace

TEST_CASE("basis squares and orthogonal products") {
    const auto e1 = Multivector::basis(1), e2 = Multivector::basis(2), e3 = Multivector::basis(3);
    CHECK(geometric_product(e1, e1) == Multivector::scalar(1.0));
    CHECK(geometric_product(e1, e2) == Multivector::bivector(1.0, 0.0, 0.0));
    CHECK(geometric_product(e2, e1) == Multivector::bivector(-1.0, 0.0, 0.0));
    CHECK(geometric_product(geometric_product(e1, e2), e3) == Multivector::pseudoscalar(1.0));
    const auto e12 = geometric_product(e1, e2);
    CHECK(geometric_product(e12, e12) == Multivector::scalar(-1.0));
}

TEST_CASE("(1 + e1)(1 + e2) expands to 1 + e1 + e2 + e12") {
    const auto a = Multivector::scalar(1.0) + Multivector::basis(1);
    const auto b = Multivector::scalar(1.0) + Multivector::basis(2);
    Multivector expected;
    expected.c = {1, 1, 1, 0, 1, 0, 0, 0};
    CHECK(geometric_product(a, b) == expected);
}

TEST_CASE("product table matches the Pauli representation for every basis pair") {
    for (std::size_t p = 0; p < 8; ++p)
        for (std::size_t q = 0; q < 8; ++q) {
            const auto a = Multivector::basis(p), b = Multivector::basis(q);
            const auto expected = from_pauli(mm(to_pauli(a), to_pauli(b)));
            CAPTURE(p);
            CAPTURE(q);
            CHECK(max_abs_diff(geometric_product(a, b), expected) < 1e-15);
        }
}

TEST_CASE("random products match the Pauli representation") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_multivector(rng), b = random_multivector(rng);
        CHECK(max_abs_diff(geometric_product(a, b), from_pauli(mm(to_pauli(a), to_pauli(b)))) < 1e-12);
    }
}

TEST_CASE("associativity, distributivity and scalar linearity") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = random_multivector(rng), b = random_multivector(rng), c = random_multivector(rng);
        const double s = u(rng);
        CHECK(max_abs_diff(geometric_product(geometric_product(a, b), c),
                           geometric_product(a, geometric_product(b, c))) < 1e-12);
        CHECK(max_abs_diff(geometric_product(a, b + c), geometric_product(a, b) + geometric_product(a, c)) < 1e-12);
        CHECK(max_abs_diff(geometric_product(a + b, c), geometric_product(a, c) + geometric_product(b, c)) < 1e-12);
        CHECK(max_abs_diff(geometric_product(s * a, b), s * geometric_product(a, b)) < 1e-12);
        CHECK(max_abs_diff(reverse(geometric_product(a, b)), geometric_product(reverse(b), reverse(a))) < 1e-12);
    }
}

TEST_CASE("grade projections") {
    const auto x = Multivector::scalar(1.0) + Multivector::basis(1) + Multivector::basis(4);
    CHECK(grade(x, 1) == Multivector::basis(1));
    CHECK(grade(Multivector::pseudoscalar(1.0), 3) == Multivector::pseudoscalar(1.0));
    const auto e123 =
        geometric_product(geometric_product(Multivector::basis(1), Multivector::basis(2)), Multivector::basis(3));
    CHECK(grade(e123, 3) == Multivector::pseudoscalar(1.0));
    CHECK_THROWS_AS(grade(x, 4), std::invalid_argument);
    CHECK_THROWS_AS(grade(x, -1), std::invalid_argument);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_multivector(rng);
        CHECK(grade(a, 0) + grade(a, 1) + grade(a, 2) + grade(a, 3) == a);
    }
}

TEST_CASE("pair invariants") {
    const auto e1 = Multivector::basis(1);
    const auto same = invariants_pair(e1, e1);
    CHECK(same[1] == doctest::Approx(1.0));
    CHECK(same[5] == doctest::Approx(1.0));
    CHECK(same[8] == doctest::Approx(1.0));
    CHECK(same[10] == doctest::Approx(0.0));

    const auto q = invariants_pair(e1, 2.0 * Multivector::basis(2));
    CHECK(q[1] == doctest::Approx(1.0));
    CHECK(q[5] == doctest::Approx(2.0));
    CHECK(q[8] == doctest::Approx(0.0));
    // |a ^ b| = |a x b|
    CHECK(q[10] == doctest::Approx(2.0));

    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = testing::random_vector(rng), b = testing::random_vector(rng);
        const std::array<double, 3> av{a[1], a[2], a[3]}, bv{b[1], b[2], b[3]};
        const double cx = av[1] * bv[2] - av[2] * bv[1], cy = av[2] * bv[0] - av[0] * bv[2],
                     cz = av[0] * bv[1] - av[1] * bv[0];
        const auto inv = invariants_pair(a, b);
        CHECK(inv[8] == doctest::Approx(av[0] * bv[0] + av[1] * bv[1] + av[2] * bv[2]).epsilon(1e-12));
        CHECK(inv[10] == doctest::Approx(std::sqrt(cx * cx + cy * cy + cz * cz)).epsilon(1e-12));
    }
}

TEST_CASE("rotor sandwich preserves pair invariants") {
    std::mt19937_64 rng(23);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Rotor r = random_rotor(rng);
        const auto a = random_multivector(rng), b = random_multivector(rng);
        const auto before = invariants_pair(a, b);
        const auto after = invariants_pair(r.apply(a), r.apply(b));
        for (std::size_t i = 0; i < before.size(); ++i) worst = std::max(worst, std::abs(before[i] - after[i]));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("rotors") {
    const double half_pi = std::numbers::pi / 2.0;
    const Rotor r = rotor_from_axis_angle({0, 0, 1}, half_pi);
    CHECK(max_abs_diff(apply_rotor(r, Multivector::basis(1)), Multivector::basis(2)) < 1e-12);

    std::mt19937_64 rng(29);
    const Rotor identity = rotor_from_axis_angle({0, 1, 0}, 0.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_multivector(rng);
        CHECK(max_abs_diff(apply_rotor(identity, a), a) < 1e-15);
    }

    CHECK_THROWS_AS(rotor_from_axis_angle({0, 0, 2}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(rotor_from_axis_angle({0, 0, 1 + 1e-6}, 1.0), std::invalid_argument);
    CHECK_NOTHROW(rotor_from_axis_angle({0, 0, 1 + 1e-12}, 1.0));
}

TEST_CASE("rotors agree with Rodrigues rotations") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::array<double, 3> k{n(rng), n(rng), n(rng)};
        const double len = std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
        for (double& x : k) x /= len;
        const double angle = n(rng) * 2.0;
        const std::array<double, 3> v{n(rng), n(rng), n(rng)};
        const auto expected = rodrigues(k, angle, v);
        const auto got = rotor_from_axis_angle(k, angle).apply(Multivector::vector(v[0], v[1], v[2]));
        for (int i = 0; i < 3; ++i) CHECK(got[static_cast<std::size_t>(i + 1)] == doctest::Approx(expected[i]).epsilon(1e-12));
        const auto m = rotor_from_axis_angle(k, angle).matrix();
        for (int i = 0; i < 3; ++i) {
            const double row = m[3 * i] * v[0] + m[3 * i + 1] * v[1] + m[3 * i + 2] * v[2];
            CHECK(row == doctest::Approx(expected[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("rotor isometry, grade preservation and composition") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 100; ++trial) {
        const Rotor r1 = random_rotor(rng), r2 = random_rotor(rng);
        const auto& rm = r1.as_multivector();
        const double norm2 = rm[0] * rm[0] + rm[4] * rm[4] + rm[5] * rm[5] + rm[6] * rm[6];
        CHECK(std::abs(norm2 - 1.0) < 1e-12);

        const auto v = testing::random_vector(rng, 3.0);
        CHECK(std::abs(r1.apply(v).vector_norm() - v.vector_norm()) < 1e-12);

        const auto a = random_multivector(rng);
        for (int k = 0; k <= 3; ++k) {
            const auto rotated = r1.apply(grade(a, k));
            CHECK(max_abs_diff(grade(rotated, k), rotated) < 1e-12);
        }
        CHECK(max_abs_diff(r2.apply(r1.apply(a)), r2.compose(r1).apply(a)) < 1e-12);
    }
}
