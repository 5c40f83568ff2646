#include <doctest.h>

#include <cmath>
#include <random>

#include "galattice/tasks.hpp"
#include "helpers.hpp"

using namespace galattice;
using namespace galattice::tasks;

namespace {

Vec3 centroid(const std::vector<Vec3>& v) {
    Vec3 c = Vec3::Zero();
    for (const Vec3& x : v) c += x;
    return c / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("task ids round trip and unknown ids are named") {
    for (TaskKind k : {TaskKind::Autoencoder, TaskKind::Denoising, TaskKind::FrameClassification,
                       TaskKind::ShiftIdentification, TaskKind::NoisyBond, TaskKind::NearestBond})
        CHECK(parse_task(task_id(k)) == k);
    try {
        parse_task("zebra");
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("'zebra'") != std::string::npos);
    }
    CHECK(is_classification(TaskKind::FrameClassification));
    CHECK(is_classification(TaskKind::NoisyBond));
    CHECK_FALSE(is_classification(TaskKind::Denoising));
    CHECK(is_static(TaskKind::Autoencoder));
    CHECK_FALSE(is_static(TaskKind::ShiftIdentification));
}

TEST_CASE("denoising with zero noise returns the input as label") {
    std::mt19937_64 rng(1);
    const PointCloud c = testing::gaussian_cloud(12, rng);
    TaskParams p;
    p.noise_std = 0.0;
    const TaskSample s = make_sample(TaskKind::Denoising, c, 0, 5, p);
    const auto& label = std::get<CloudLabel>(s.label);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK((s.input.bonds[i] - c.bonds[i]).norm() == 0.0);
        CHECK((label[i] - c.bonds[i]).norm() == 0.0);
    }
}

TEST_CASE("denoising noise has zero mean and no residual rotation") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const PointCloud c = testing::gaussian_cloud(16, rng);
        const TaskSample s = make_sample(TaskKind::Denoising, c, 0, 100 + trial);
        CHECK((centroid(s.input.bonds) - centroid(c.bonds)).norm() < 1e-12);
        const Vec3 cc = centroid(c.bonds);
        std::vector<Vec3> a, b;
        for (std::size_t i = 0; i < c.size(); ++i) {
            a.push_back(s.input.bonds[i] - cc);
            b.push_back(c.bonds[i] - cc);
        }
        CHECK((best_fit_rotation(a, b) - Mat3::Identity()).norm() < 1e-9);
        CHECK(s.input.types == c.types);
    }
}

TEST_CASE("best-fit rotation recovers a known rotation") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const PointCloud c = testing::gaussian_cloud(10, rng);
        const Mat3 r = testing::rotor_matrix(testing::random_rotor(rng));
        const Vec3 cc = centroid(c.bonds);
        std::vector<Vec3> moving, target;
        for (const Vec3& b : c.bonds) {
            moving.push_back(b - cc);
            target.push_back(r * (b - cc));
        }
        const Mat3 fit = best_fit_rotation(moving, target);
        CHECK((fit - r).norm() < 1e-9);
        CHECK(fit.determinant() == doctest::Approx(1.0));
    }
}

TEST_CASE("shift identification: input minus label recovers the cloud") {
    std::mt19937_64 rng(4);
    const PointCloud c = testing::gaussian_cloud(8, rng);
    const TaskSample s = make_sample(TaskKind::ShiftIdentification, c, 0, 9);
    const Vec3 d = std::get<VectorLabel>(s.label);
    CHECK(d.norm() > 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK((s.input.bonds[i] - d - c.bonds[i]).norm() < 1e-14);
}

TEST_CASE("noisy bond flags exactly half the bonds and perturbs only those") {
    std::mt19937_64 rng(5);
    const PointCloud c = testing::gaussian_cloud(20, rng);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const TaskSample s = make_sample(TaskKind::NoisyBond, c, 0, seed);
        const auto& flags = std::get<FlagLabel>(s.label);
        int flagged = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            flagged += flags[i];
            const double moved = (s.input.bonds[i] - c.bonds[i]).norm();
            if (flags[i])
                CHECK(moved > 0.0);
            else
                CHECK(moved == 0.0);
        }
        CHECK(flagged == 10);
    }
}

TEST_CASE("nearest bond removes the shortest bond and keeps the rest") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const PointCloud c = testing::gaussian_cloud(9, rng);
        const TaskSample s = make_sample(TaskKind::NearestBond, c, 0, 1);
        const Vec3 label = std::get<VectorLabel>(s.label);
        REQUIRE(s.input.size() == 8);
        for (const Vec3& b : s.input.bonds) CHECK(b.norm() >= label.norm());
        std::size_t matches = 0;
        for (const Vec3& b : c.bonds) matches += (b - label).norm() == 0.0 ? 1 : 0;
        CHECK(matches == 1);
    }
}

TEST_CASE("samples are deterministic in the seed and too-small clouds are rejected") {
    std::mt19937_64 rng(7);
    const PointCloud c = testing::gaussian_cloud(6, rng);
    const TaskSample a = make_sample(TaskKind::Denoising, c, 0, 42), b = make_sample(TaskKind::Denoising, c, 0, 42);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK((a.input.bonds[i] - b.input.bonds[i]).norm() == 0.0);
    PointCloud tiny;
    tiny.bonds = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
    tiny.types = {0, 0};
    CHECK_THROWS_AS(make_sample(TaskKind::NearestBond, tiny, 0, 1), std::invalid_argument);
    CHECK_NOTHROW(make_sample(TaskKind::ShiftIdentification, tiny, 0, 1));
}

TEST_CASE("orientation bottleneck builds a right-handed orthonormal frame") {
    const Mat3 f = orientation_bottleneck(Vec3(2, 0, 0), Vec3(1, 3, 0));
    CHECK((f.row(0).transpose() - Vec3(1, 0, 0)).norm() < 1e-15);
    CHECK((f.row(1).transpose() - Vec3(0, 1, 0)).norm() < 1e-15);
    CHECK((f.row(2).transpose() - Vec3(0, 0, 1)).norm() < 1e-15);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n;
    for (int t = 0; t < 50; ++t) {
        const Vec3 v1(n(rng), n(rng), n(rng)), v2(n(rng), n(rng), n(rng));
        const Mat3 m = orientation_bottleneck(v1, v2);
        CHECK((m * m.transpose() - Mat3::Identity()).norm() < 1e-12);
        CHECK(m.determinant() == doctest::Approx(1.0));
        const Mat3 r = testing::rotor_matrix(testing::random_rotor(rng));
        const Mat3 mr = orientation_bottleneck(r * v1, r * v2);
        CHECK((mr - m * r.transpose()).norm() < 1e-12);
    }
    CHECK_THROWS_AS(orientation_bottleneck(Vec3(1e-9, 0, 0), Vec3(0, 1, 0)), std::invalid_argument);
    CHECK_THROWS_AS(orientation_bottleneck(Vec3(1, 0, 0), Vec3(2, 0, 0)), std::invalid_argument);
}

TEST_CASE("sorted_by_radius is stable") {
    const std::vector<Vec3> v = {Vec3(0, 2, 0), Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3(0.5, 0, 0)};
    const auto s = sorted_by_radius(v);
    CHECK(s[0] == v[3]);
    CHECK(s[1] == v[1]);
    CHECK(s[2] == v[2]);
    CHECK(s[3] == v[0]);
}

TEST_CASE("losses and metrics on hand-computed examples") {
    PointCloud c;
    c.bonds = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1)};
    c.types = {0, 0, 0, 0};
    const TaskSample frame = make_sample(TaskKind::FrameClassification, c, 2, 0);
    Prediction p;
    p.classes = 4;
    p.logits = {0.0, 0.0, 0.0, 0.0};
    CHECK(task_loss(p, frame) == doctest::Approx(std::log(4.0)));
    CHECK(validation_metric(TaskKind::FrameClassification, {p}, {frame}) == 1.0);
    p.logits = {0.0, 0.0, 1.0, 0.0};
    CHECK(validation_metric(TaskKind::FrameClassification, {p}, {frame}) == 0.0);

    const TaskSample shift = make_sample(TaskKind::ShiftIdentification, c, 0, 3);
    const Vec3 d = std::get<VectorLabel>(shift.label);
    Prediction q;
    q.vectors = {d + Vec3(0.3, -0.3, 0.6)};
    CHECK(task_loss(q, shift) == doctest::Approx((0.09 + 0.09 + 0.36) / 3.0));
    CHECK(validation_metric(TaskKind::ShiftIdentification, {q}, {shift}) == doctest::Approx(0.4));

    const TaskSample ae = make_sample(TaskKind::Autoencoder, c, 0, 0);
    Prediction r;
    r.vectors = sorted_by_radius(c.bonds);
    r.mu = {0.0, 0.0};
    r.logvar = {0.0, 0.0};
    CHECK(task_loss(r, ae) == doctest::Approx(0.0));
    r.mu = {1.0, 0.0};
    TaskParams tp;
    tp.beta = 0.5;
    CHECK(task_loss(r, ae, tp) == doctest::Approx(0.5 * 0.5));

    CHECK_THROWS_AS(validation_metric(TaskKind::ShiftIdentification, {}, {}), std::invalid_argument);
    CHECK_THROWS_AS(validation_metric(TaskKind::ShiftIdentification, {q, q}, {shift}), std::invalid_argument);
}

TEST_CASE("argmax ties go to the lowest index") {
    const double v[] = {1.0, 3.0, 3.0, 2.0};
    CHECK(argmax(v, v + 4) == 1);
}
