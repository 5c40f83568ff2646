#include "galattice/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <random>

#include "galattice/model.hpp"
#include "galattice/neighbors.hpp"
#include "galattice/parallel.hpp"
#include "galattice/random.hpp"

namespace galattice::eval {

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << std::setprecision(17);
    return os;
}

void fix_sign(Matrix& rows, Eigen::Index i) {
    Eigen::Index big = 0;
    rows.row(i).cwiseAbs().maxCoeff(&big);
    if (rows(i, big) < 0.0) rows.row(i) *= -1.0;
}

}  // namespace

EmbeddingMatrix embed(const ModelParams& model, const std::vector<PointCloud>& clouds, std::size_t threads) {
    EmbeddingMatrix out;
    out.source = std::string(task_id(model.task));
    const std::size_t width = model::embedding_width(model);
    out.rows = Matrix::Zero(static_cast<Eigen::Index>(clouds.size()), static_cast<Eigen::Index>(width));
    const std::size_t t = std::max<std::size_t>(1, threads);
    std::vector<std::map<std::size_t, std::unique_ptr<model::TaskGraph>>> graphs(t);
    parallel_for(clouds.size(), t, [&](std::size_t i, std::size_t w) {
        auto& g = graphs[w][clouds[i].size()];
        if (!g) g = std::make_unique<model::TaskGraph>(model, clouds[i].size(), false);
        std::vector<double> e;
        g->predict(model, clouds[i], &e);
        for (std::size_t c = 0; c < width; ++c) out.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = e[c];
    });
    return out;
}

std::vector<PointCloud> configuration_clouds(const structure::Configuration& config, std::size_t k,
                                             std::size_t max_particles, std::uint64_t seed, std::size_t threads) {
    if (k >= config.size())
        throw std::invalid_argument("configuration of " + std::to_string(config.size()) + " particles is too small for k = " +
                                    std::to_string(k));
    std::vector<std::size_t> particles(config.size());
    std::iota(particles.begin(), particles.end(), 0);
    if (max_particles > 0 && max_particles < particles.size()) {
        std::mt19937_64 rng(mix_seed({seed, hash_string("particles")}));
        std::shuffle(particles.begin(), particles.end(), rng);
        particles.resize(max_particles);
        std::sort(particles.begin(), particles.end());
    }
    const structure::NeighborFinder finder(config, k);
    std::vector<PointCloud> clouds(particles.size());
    parallel_for(particles.size(), threads, [&](std::size_t i, std::size_t) { clouds[i] = finder.cloud(particles[i]); });
    return clouds;
}

PcaResult pca(const Matrix& data, std::size_t n_components) {
    const auto n = data.rows(), d = data.cols();
    if (n < 2) throw std::invalid_argument("PCA needs at least 2 rows");
    if (n_components == 0 || static_cast<Eigen::Index>(n_components) > d)
        throw std::invalid_argument("PCA: " + std::to_string(n_components) + " components requested from " +
                                    std::to_string(d) + " columns");
    const auto c = static_cast<Eigen::Index>(n_components);
    PcaResult r;
    r.mean = data.colwise().mean().transpose();
    const Matrix x = data.rowwise() - r.mean.transpose();
    const double denom = static_cast<double>(n - 1);
    r.components = Matrix::Zero(c, d);
    r.variance = Eigen::VectorXd::Zero(c);
    const Eigen::Index rank = std::min(d, n - 1);
    if (d <= n) {
        const Eigen::SelfAdjointEigenSolver<Matrix> eig((x.transpose() * x) / denom);
        for (Eigen::Index i = 0; i < c; ++i) {
            r.components.row(i) = eig.eigenvectors().col(d - 1 - i).transpose();
            r.variance[i] = std::max(0.0, eig.eigenvalues()[d - 1 - i]);
        }
    } else {
        // Gram route: fewer rows than columns
        const Eigen::SelfAdjointEigenSolver<Matrix> eig((x * x.transpose()) / denom);
        for (Eigen::Index i = 0; i < std::min(c, rank); ++i) {
            const double lambda = eig.eigenvalues()[n - 1 - i];
            if (lambda <= 0.0) break;
            Eigen::VectorXd v = x.transpose() * eig.eigenvectors().col(n - 1 - i);
            r.components.row(i) = (v / v.norm()).transpose();
            r.variance[i] = lambda;
        }
    }
    if (c > rank) {
        r.rank_deficient = true;
        for (Eigen::Index i = rank; i < c; ++i) r.variance[i] = 0.0;
    }
    for (Eigen::Index i = 0; i < c; ++i)
        if (r.components.row(i).squaredNorm() > 0.0) fix_sign(r.components, i);
    r.projected = x * r.components.transpose();
    const double total = (x.array().square().colwise().sum() / denom).sum();
    r.explained = total > 0.0 ? Eigen::VectorXd(r.variance / total) : Eigen::VectorXd::Zero(c);
    return r;
}

RocResult roc_auc(const std::vector<double>& scores_a, const std::vector<double>& scores_b) {
    if (scores_a.empty() || scores_b.empty()) throw std::invalid_argument("ROC AUC needs non-empty score lists");
    struct Entry {
        double score;
        bool b;
    };
    std::vector<Entry> all;
    all.reserve(scores_a.size() + scores_b.size());
    for (double s : scores_a) all.push_back({s, false});
    for (double s : scores_b) all.push_back({s, true});
    for (const Entry& e : all)
        if (std::isnan(e.score)) throw std::invalid_argument("ROC AUC scores contain NaN");
    std::sort(all.begin(), all.end(), [](const Entry& x, const Entry& y) { return x.score < y.score; });
    // twice the rank sum of B keeps tied (half-integer) ranks exact
    double twice_rank_b = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        std::size_t in_b = 0;
        while (j < all.size() && all[j].score == all[i].score) in_b += all[j++].b ? 1 : 0;
        twice_rank_b += static_cast<double>(in_b) * static_cast<double>(i + 1 + j);
        i = j;
    }
    const double nb = static_cast<double>(scores_b.size()), na = static_cast<double>(scores_a.size());
    RocResult r;
    r.n_a = scores_a.size();
    r.n_b = scores_b.size();
    const double twice_u = twice_rank_b - nb * (nb + 1.0);
    r.raw = (twice_u / 2.0) / (na * nb);
    r.auc = std::max(r.raw, 1.0 - r.raw);
    return r;
}

RocResult zero_shot(const Matrix& features_a, const Matrix& features_b) {
    if (features_a.cols() != features_b.cols()) throw std::invalid_argument("zero-shot populations differ in width");
    Matrix joint(features_a.rows() + features_b.rows(), features_a.cols());
    joint << features_a, features_b;
    const PcaResult p = pca(joint, 1);
    std::vector<double> a(static_cast<std::size_t>(features_a.rows())), b(static_cast<std::size_t>(features_b.rows()));
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = p.projected(static_cast<Eigen::Index>(i), 0);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = p.projected(features_a.rows() + static_cast<Eigen::Index>(i), 0);
    return roc_auc(a, b);
}

RocResult zero_shot_pair(const Featurizer& featurize, const SnapshotPair& pair, std::size_t k, std::size_t max_particles,
                         std::uint64_t seed, std::size_t threads) {
    if (pair.a.size() == 0 || pair.b.size() == 0) throw std::invalid_argument("snapshot pair '" + pair.label + "' is empty");
    const auto ca = configuration_clouds(pair.a, k, max_particles, mix_seed({seed, 0}), threads);
    const auto cb = configuration_clouds(pair.b, k, max_particles, mix_seed({seed, 1}), threads);
    return zero_shot(featurize(ca), featurize(cb));
}

void write_zero_shot_csv(const std::vector<ZeroShotRow>& rows, const std::filesystem::path& path) {
    std::ofstream os = open_csv(path);
    os << "pair,method,auc,raw_auc,n_a,n_b\n";
    for (const ZeroShotRow& r : rows)
        os << r.pair << ',' << r.method << ',' << r.roc.auc << ',' << r.roc.raw << ',' << r.roc.n_a << ',' << r.roc.n_b
           << '\n';
}

std::vector<std::size_t> training_frames(std::size_t n_frames, std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("frame stride must be positive");
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < n_frames; f += stride) out.push_back(f);
    return out;
}

std::size_t frame_class(std::size_t frame_position, std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("frame stride must be positive");
    return frame_position / stride;
}

data::CloudDataset trajectory_dataset(const std::vector<structure::TrajectoryFrame>& frames, std::size_t stride,
                                      std::size_t clouds_per_frame, std::size_t k, double validation_fraction,
                                      std::uint64_t seed, std::size_t threads) {
    const auto train = training_frames(frames.size(), stride);
    if (train.size() < 2) throw std::invalid_argument("a trajectory needs at least 2 training frames");
    std::vector<data::LabeledConfiguration> sources;
    std::vector<std::size_t> counts;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < train.size(); ++c) {
        const auto& f = frames[train[c]];
        data::LabeledConfiguration lc;
        lc.source = "frame" + std::to_string(f.index);
        lc.label = c;
        lc.config = f.config;
        names.push_back(lc.source);
        counts.push_back(std::min(clouds_per_frame, f.config.size()));
        sources.push_back(std::move(lc));
    }
    return data::dataset_from_configurations(sources, counts, names, k, validation_fraction, seed, threads);
}

FrameHistogram frame_histogram(const ModelParams& classifier, const std::vector<structure::TrajectoryFrame>& frames,
                               std::size_t stride, std::size_t k, std::size_t max_particles, std::uint64_t seed,
                               std::size_t threads) {
    if (classifier.task != TaskKind::FrameClassification)
        throw std::invalid_argument("frame histogram needs a frame-classification model, got '" +
                                    std::string(task_id(classifier.task)) + "'");
    const auto train = training_frames(frames.size(), stride);
    const std::size_t classes = classifier.head.n_classes;
    if (classes != train.size())
        throw std::invalid_argument("class-count mismatch: model has " + std::to_string(classes) + " classes, trajectory has " +
                                    std::to_string(train.size()) + " training frames at stride " + std::to_string(stride));
    FrameHistogram h;
    const std::size_t t = std::max<std::size_t>(1, threads);
    std::vector<std::unique_ptr<model::TaskGraph>> graphs(t);
    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
        const auto clouds = configuration_clouds(frames[fi].config, k, max_particles, mix_seed({seed, fi}), t);
        std::vector<std::size_t> predicted(clouds.size());
        parallel_for(clouds.size(), t, [&](std::size_t i, std::size_t w) {
            if (!graphs[w]) graphs[w] = std::make_unique<model::TaskGraph>(classifier, k, false);
            const auto p = graphs[w]->predict(classifier, clouds[i]);
            predicted[i] = tasks::argmax(p.logits.data(), p.logits.data() + p.logits.size());
        });
        std::vector<std::size_t> counts(classes, 0);
        for (std::size_t c : predicted) ++counts[c];
        h.frame_index.push_back(frames[fi].index);
        h.training.push_back(fi % stride == 0);
        h.tag.push_back(frames[fi].tag);
        h.counts.push_back(std::move(counts));
    }
    return h;
}

void write_frame_histogram_csv(const FrameHistogram& h, const std::filesystem::path& path) {
    std::ofstream os = open_csv(path);
    const std::size_t classes = h.counts.empty() ? 0 : h.counts[0].size();
    os << "frame,tag,training";
    for (std::size_t c = 0; c < classes; ++c) os << ",class" << c;
    os << '\n';
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        os << h.frame_index[i] << ',';
        if (h.tag[i]) os << *h.tag[i];
        os << ',' << (h.training[i] ? 1 : 0);
        for (std::size_t c : h.counts[i]) os << ',' << c;
        os << '\n';
    }
}

}  // namespace galattice::eval
