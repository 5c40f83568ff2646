#include <doctest.h>

#include <algorithm>
#include <random>

#include "galattice/evaluation.hpp"
#include "galattice/features.hpp"
#include "galattice/model.hpp"
#include "galattice/trainer.hpp"
#include "helpers.hpp"

using namespace galattice;
using namespace galattice::eval;

namespace {

double brute_force_auc(const std::vector<double>& a, const std::vector<double>& b) {
    double count = 0.0;
    for (double x : a)
        for (double y : b) count += y > x ? 1.0 : (y == x ? 0.5 : 0.0);
    return count / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

structure::Configuration noisy(const std::string& proto, std::size_t n, double noise, std::uint64_t seed) {
    return structure::add_thermal_noise(structure::replicate(structure::build_prototype(proto), n), noise, seed);
}

}  // namespace

TEST_CASE("ROC AUC examples") {
    CHECK(roc_auc({0, 1, 2}, {1.5, 2.5, 3.5}).raw == doctest::Approx(8.0 / 9.0));
    const RocResult same = roc_auc({1, 1, 1}, {1, 1});
    CHECK(same.raw == 0.5);
    CHECK(same.auc == 0.5);
    CHECK(roc_auc({0, 1}, {2, 3}).auc == 1.0);
    const RocResult rev = roc_auc({2, 3}, {0, 1});
    CHECK(rev.raw == 0.0);
    CHECK(rev.auc == 1.0);
    CHECK(rev.n_a == 2);
    CHECK_THROWS_AS(roc_auc({}, {1.0}), std::invalid_argument);
}

TEST_CASE("ROC AUC equals the brute-force pair count exactly") {
    std::mt19937_64 rng(41);
    for (std::size_t na = 1; na <= 50; na += 7)
        for (std::size_t nb = 1; nb <= 50; nb += 5)
            for (int ties = 0; ties < 2; ++ties) {
                std::uniform_int_distribution<int> small(0, 5);
                std::normal_distribution<double> wide;
                std::vector<double> a(na), b(nb);
                for (double& x : a) x = ties ? small(rng) : wide(rng);
                for (double& x : b) x = ties ? small(rng) : wide(rng) + 0.3;
                const RocResult r = roc_auc(a, b);
                CHECK(r.raw == brute_force_auc(a, b));
                CHECK(r.auc >= 0.5);
                CHECK(r.auc == std::max(r.raw, 1.0 - r.raw));
            }
}

TEST_CASE("PCA on closed-form examples") {
    Matrix line(4, 2);
    line << 0, 0, 1, 2, 2, 4, 3, 6;
    const PcaResult l = pca(line, 2);
    CHECK(l.explained[0] == doctest::Approx(1.0));
    CHECK(l.variance[1] == doctest::Approx(0.0).epsilon(1e-12));

    const double a = std::sqrt(6.0), b = std::sqrt(1.5);
    Matrix axis(4, 2);
    axis << a, 0, -a, 0, 0, b, 0, -b;
    const PcaResult p = pca(axis, 2);
    CHECK(p.variance[0] == doctest::Approx(4.0));
    CHECK(p.variance[1] == doctest::Approx(1.0));
    CHECK((p.components.row(0) - Eigen::RowVector2d(1, 0)).norm() < 1e-12);
    CHECK((p.components.row(1) - Eigen::RowVector2d(0, 1)).norm() < 1e-12);
    CHECK_FALSE(p.rank_deficient);
    CHECK_THROWS_AS(pca(axis, 3), std::invalid_argument);
    CHECK_THROWS_AS(pca(Matrix::Ones(1, 2), 1), std::invalid_argument);
}

TEST_CASE("PCA reconstruction, sign convention, permutation and wide data") {
    std::mt19937_64 rng(42);
    Matrix x(30, 5);
    std::normal_distribution<double> n;
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng) * (1 + i % 5);
    const PcaResult p = pca(x, 5);
    const Matrix centered = x.rowwise() - p.mean.transpose();
    CHECK((p.projected * p.components - centered).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((p.components * p.components.transpose() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
    for (Eigen::Index i = 0; i < 5; ++i) {
        Eigen::Index big = 0;
        p.components.row(i).cwiseAbs().maxCoeff(&big);
        CHECK(p.components(i, big) > 0.0);
        if (i > 0) CHECK(p.variance[i] <= p.variance[i - 1]);
    }
    Matrix shuffled = x;
    std::vector<Eigen::Index> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Eigen::Index i = 0; i < 30; ++i) shuffled.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    const PcaResult q = pca(shuffled, 5);
    CHECK((q.components - p.components).cwiseAbs().maxCoeff() < 1e-9);

    // more columns than rows
    Matrix wide = Matrix::Zero(4, 9);
    for (Eigen::Index i = 0; i < wide.size(); ++i) wide.data()[i] = n(rng);
    const PcaResult w = pca(wide, 5);
    const Matrix wc = wide.rowwise() - wide.colwise().mean();
    const Eigen::SelfAdjointEigenSolver<Matrix> ref((wc.transpose() * wc) / 3.0);
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(w.variance[i] == doctest::Approx(ref.eigenvalues()[8 - i]));
        CHECK(std::abs(std::abs(w.components.row(i).dot(ref.eigenvectors().col(8 - i))) - 1.0) < 1e-9);
    }
    CHECK(w.rank_deficient);
    CHECK(w.variance[3] == 0.0);
    CHECK(w.variance[4] == 0.0);
}

TEST_CASE("zero-shot controls and rotation invariance") {
    std::mt19937_64 rng(43);
    Matrix a(40, 3);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = std::normal_distribution<double>()(rng);
    CHECK(zero_shot(a, a).auc == 0.5);
    Matrix b = a;
    b.col(1).array() += 10.0;
    CHECK(zero_shot(a, b).auc == 1.0);

    SnapshotPair pair{"S_A/S_B", noisy("cF4-Cu", 300, 0.05, 1), noisy("cI2-W", 300, 0.05, 2)};
    const Featurizer q = [](const std::vector<PointCloud>& clouds) {
        const auto rows = features::featurize_all(features::Method::Q, clouds);
        Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        return m;
    };
    const RocResult base = zero_shot_pair(q, pair, 20, 120, 5);
    CHECK(base.n_a == 120);
    CHECK(base.auc > 0.95);
    SnapshotPair rotated = pair;
    const Mat3 r = testing::rotor_matrix(testing::random_rotor(rng));
    rotated.b.box = rotated.b.box * r.transpose();
    for (Vec3& p : rotated.b.positions) p = r * p;
    CHECK(std::abs(zero_shot_pair(q, rotated, 20, 120, 5).auc - base.auc) < 1e-6);
}

TEST_CASE("embedding widths and determinism") {
    std::mt19937_64 rng(44);
    std::vector<PointCloud> clouds = {testing::gaussian_cloud(20, rng, 4)};
    clouds.push_back(clouds[0]);
    HeadConfig h;
    h.n_classes = 3;
    for (TaskKind task : kAllTasks) {
        const ModelParams m = model::init_model(task, net::NetConfig{}, h, 2);
        const EmbeddingMatrix e = embed(m, clouds, 2);
        CHECK(e.rows.cols() == (task == TaskKind::Autoencoder ? 8 : 32));
        CHECK(e.rows.row(0) == e.rows.row(1));
        CHECK(e.source == task_id(task));
    }
}

TEST_CASE("frame histogram of a two-phase trajectory") {
    std::vector<structure::TrajectoryFrame> frames;
    for (std::size_t f = 0; f < 8; ++f) {
        structure::TrajectoryFrame fr;
        fr.index = f;
        fr.tag = 1.0 - 0.1 * static_cast<double>(f);
        fr.config = noisy(f < 4 ? "cP1-Po" : "cF4-Cu", 200, 0.02, 100 + f);
        frames.push_back(std::move(fr));
    }
    const std::size_t k = 8;
    const data::CloudDataset d = trajectory_dataset(frames, 4, 60, k, 0.3, 7);
    CHECK(d.n_classes() == 2);
    CHECK(d.size() == 120);

    net::NetConfig n;
    n.width = 8;
    n.hidden = 16;
    n.blocks = 1;
    HeadConfig h;
    h.n_classes = 2;
    train::TrainConfig c;
    c.batch_size = 4;
    c.accumulation = 1;
    c.max_epochs = 30;
    c.adam.learning_rate = 3e-3;
    c.target_metric = 0.0;
    const auto result = train::train(model::init_model(TaskKind::FrameClassification, n, h, 3), d, d.train_indices(),
                                     d.validation_indices(), c);
    CHECK(result.best_metric < 0.1);

    const FrameHistogram hist = frame_histogram(result.model, frames, 4, k, 50, 1);
    REQUIRE(hist.counts.size() == 8);
    for (std::size_t f = 0; f < 8; ++f) {
        CHECK(hist.counts[f][0] + hist.counts[f][1] == 50);
        CHECK(hist.training[f] == (f % 4 == 0));
        const std::size_t expected = f < 4 ? 0 : 1;
        CHECK(hist.counts[f][expected] >= 40);
    }
    CHECK(frame_class(6, 4) == 1);
    ModelParams wrong = result.model;
    wrong.head.n_classes = 3;
    CHECK_THROWS_AS(frame_histogram(wrong, frames, 4, k), std::invalid_argument);
    CHECK_THROWS_AS(frame_histogram(result.model, frames, 2, k), std::invalid_argument);
}
