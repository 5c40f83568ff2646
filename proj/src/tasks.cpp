#include "galattice/tasks.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace galattice {

std::string_view task_id(TaskKind kind) {
    switch (kind) {
        case TaskKind::Autoencoder: return "autoencoder";
        case TaskKind::Denoising: return "denoising";
        case TaskKind::FrameClassification: return "frame";
        case TaskKind::ShiftIdentification: return "shift";
        case TaskKind::NoisyBond: return "noisy";
        case TaskKind::NearestBond: return "nearest";
    }
    return "unknown";
}

TaskKind parse_task(std::string_view id) {
    for (TaskKind k : kAllTasks)
        if (task_id(k) == id) return k;
    throw std::invalid_argument("unknown task id '" + std::string(id) + "'");
}

bool is_classification(TaskKind kind) {
    return kind == TaskKind::FrameClassification || kind == TaskKind::NoisyBond;
}

bool is_static(TaskKind kind) {
    return kind == TaskKind::Autoencoder || kind == TaskKind::FrameClassification || kind == TaskKind::NearestBond;
}

namespace tasks {

std::size_t min_bonds(TaskKind kind) {
    switch (kind) {
        case TaskKind::NearestBond: return 3;
        case TaskKind::Denoising: return 3;
        default: return 2;
    }
}

std::vector<Vec3> sorted_by_radius(const std::vector<Vec3>& bonds) {
    std::vector<std::size_t> order(bonds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return bonds[a].norm() < bonds[b].norm(); });
    std::vector<Vec3> out;
    out.reserve(bonds.size());
    for (std::size_t i : order) out.push_back(bonds[i]);
    return out;
}

Mat3 best_fit_rotation(const std::vector<Vec3>& moving, const std::vector<Vec3>& target) {
    if (moving.size() != target.size() || moving.empty())
        throw std::invalid_argument("best_fit_rotation: point sets differ in size");
    Vec3 cm = Vec3::Zero(), ct = Vec3::Zero();
    for (std::size_t i = 0; i < moving.size(); ++i) {
        cm += moving[i];
        ct += target[i];
    }
    cm /= static_cast<double>(moving.size());
    ct /= static_cast<double>(target.size());
    Mat3 h = Mat3::Zero();
    for (std::size_t i = 0; i < moving.size(); ++i) h += (moving[i] - cm) * (target[i] - ct).transpose();
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat3 u = svd.matrixU(), v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return v * d * u.transpose();
}

Mat3 orientation_bottleneck(const Vec3& v1, const Vec3& v2) {
    const double n1 = v1.norm();
    if (!(n1 > 1e-8)) throw std::invalid_argument("orientation bottleneck: degenerate first vector");
    const Vec3 b1 = v1 / n1;
    const Vec3 u = v2 - v2.dot(b1) * b1;
    const double n2 = u.norm();
    if (!(n2 > 1e-8)) throw std::invalid_argument("orientation bottleneck: second vector is parallel to the first");
    const Vec3 b2 = u / n2;
    Mat3 m;
    m.row(0) = b1.transpose();
    m.row(1) = b2.transpose();
    m.row(2) = b1.cross(b2).transpose();
    return m;
}

TaskSample make_sample(TaskKind kind, const PointCloud& cloud, std::size_t class_index, std::uint64_t seed,
                       const TaskParams& params) {
    validate_cloud(cloud, min_bonds(kind));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double sd = params.noise_std;
    const std::size_t k = cloud.size();
    TaskSample s;
    s.kind = kind;
    s.seed = seed;
    s.input = cloud;
    switch (kind) {
        case TaskKind::Autoencoder:
            s.label = CloudLabel(cloud.bonds);
            break;
        case TaskKind::FrameClassification:
            s.label = ClassLabel(class_index);
            break;
        case TaskKind::Denoising: {
            if (sd == 0.0) {
                s.label = CloudLabel(cloud.bonds);
                break;
            }
            std::vector<Vec3> noisy = cloud.bonds;
            Vec3 mean = Vec3::Zero();
            for (Vec3& b : noisy) {
                const Vec3 d(sd * noise(rng), sd * noise(rng), sd * noise(rng));
                b += d;
                mean += d;
            }
            mean /= static_cast<double>(k);
            for (Vec3& b : noisy) b -= mean;
            const Mat3 r = best_fit_rotation(noisy, cloud.bonds);
            Vec3 c = Vec3::Zero();
            for (const Vec3& b : noisy) c += b;
            c /= static_cast<double>(k);
            for (Vec3& b : noisy) b = r * (b - c) + c;
            s.input.bonds = std::move(noisy);
            s.label = CloudLabel(cloud.bonds);
            break;
        }
        case TaskKind::ShiftIdentification: {
            const Vec3 d(sd * noise(rng), sd * noise(rng), sd * noise(rng));
            for (Vec3& b : s.input.bonds) b += d;
            s.label = VectorLabel(d);
            break;
        }
        case TaskKind::NoisyBond: {
            std::vector<std::size_t> order(k);
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            FlagLabel flags(k, 0);
            for (std::size_t i = 0; i < k / 2; ++i) flags[order[i]] = 1;
            for (std::size_t i = 0; i < k; ++i)
                if (flags[i]) s.input.bonds[i] += Vec3(sd * noise(rng), sd * noise(rng), sd * noise(rng));
            s.label = std::move(flags);
            break;
        }
        case TaskKind::NearestBond: {
            std::size_t nearest = 0;
            for (std::size_t i = 1; i < k; ++i)
                if (cloud.bonds[i].norm() < cloud.bonds[nearest].norm()) nearest = i;
            s.label = VectorLabel(cloud.bonds[nearest]);
            s.input.bonds.erase(s.input.bonds.begin() + static_cast<std::ptrdiff_t>(nearest));
            s.input.types.erase(s.input.types.begin() + static_cast<std::ptrdiff_t>(nearest));
            break;
        }
    }
    return s;
}

std::vector<Vec3> geometric_target(const TaskSample& sample) {
    switch (sample.kind) {
        case TaskKind::Autoencoder: return sorted_by_radius(std::get<CloudLabel>(sample.label));
        case TaskKind::Denoising: return std::get<CloudLabel>(sample.label);
        case TaskKind::ShiftIdentification:
        case TaskKind::NearestBond: return {std::get<VectorLabel>(sample.label)};
        default: throw std::invalid_argument("task '" + std::string(task_id(sample.kind)) + "' is not geometric");
    }
}

std::vector<std::size_t> class_targets(const TaskSample& sample) {
    switch (sample.kind) {
        case TaskKind::FrameClassification: return {std::get<ClassLabel>(sample.label)};
        case TaskKind::NoisyBond: {
            const auto& flags = std::get<FlagLabel>(sample.label);
            return {flags.begin(), flags.end()};
        }
        default:
            throw std::invalid_argument("task '" + std::string(task_id(sample.kind)) + "' is not a classification");
    }
}

std::size_t argmax(const double* begin, const double* end) {
    std::size_t best = 0;
    for (const double* p = begin + 1; p < end; ++p)
        if (*p > begin[best]) best = static_cast<std::size_t>(p - begin);
    return best;
}

namespace {

std::size_t logit_width(const Prediction& p, std::size_t rows) {
    if (rows == 0 || p.logits.size() % rows != 0)
        throw std::invalid_argument("prediction holds " + std::to_string(p.logits.size()) + " logits for " +
                                    std::to_string(rows) + " targets");
    return p.logits.size() / rows;
}

void check_vectors(const Prediction& p, const std::vector<Vec3>& target) {
    if (p.vectors.size() != target.size())
        throw std::invalid_argument("prediction holds " + std::to_string(p.vectors.size()) + " vectors for " +
                                    std::to_string(target.size()) + " targets");
}

}  // namespace

double task_loss(const Prediction& prediction, const TaskSample& sample, const TaskParams& params) {
    if (is_classification(sample.kind)) {
        const auto targets = class_targets(sample);
        const std::size_t c = logit_width(prediction, targets.size());
        double total = 0.0;
        for (std::size_t r = 0; r < targets.size(); ++r) {
            const double* row = prediction.logits.data() + r * c;
            if (targets[r] >= c) throw std::invalid_argument("class index out of range");
            const double mx = *std::max_element(row, row + c);
            double z = 0.0;
            for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
            total += std::log(z) + mx - row[targets[r]];
        }
        return total / static_cast<double>(targets.size());
    }
    const auto target = geometric_target(sample);
    check_vectors(prediction, target);
    double se = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) se += (prediction.vectors[i] - target[i]).squaredNorm();
    double loss = se / (3.0 * static_cast<double>(target.size()));
    if (sample.kind == TaskKind::Autoencoder) {
        double kl = 0.0;
        for (std::size_t i = 0; i < prediction.mu.size(); ++i) {
            const double m = prediction.mu[i], lv = prediction.logvar[i];
            kl += 0.5 * (std::exp(lv) + m * m - 1.0 - lv);
        }
        loss += params.beta * kl;
    }
    return loss;
}

double validation_metric(TaskKind kind, const std::vector<Prediction>& predictions,
                         const std::vector<TaskSample>& samples) {
    if (predictions.empty()) throw std::invalid_argument("validation metric of an empty set");
    if (predictions.size() != samples.size())
        throw std::invalid_argument("validation metric: " + std::to_string(predictions.size()) + " predictions for " +
                                    std::to_string(samples.size()) + " samples");
    double errors = 0.0, count = 0.0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        if (samples[s].kind != kind) throw std::invalid_argument("validation metric: sample of another task");
        const Prediction& p = predictions[s];
        if (is_classification(kind)) {
            const auto targets = class_targets(samples[s]);
            const std::size_t c = logit_width(p, targets.size());
            for (std::size_t r = 0; r < targets.size(); ++r) {
                const double* row = p.logits.data() + r * c;
                errors += argmax(row, row + c) != targets[r] ? 1.0 : 0.0;
                count += 1.0;
            }
        } else {
            const auto target = geometric_target(samples[s]);
            check_vectors(p, target);
            for (std::size_t i = 0; i < target.size(); ++i) errors += (p.vectors[i] - target[i]).cwiseAbs().sum();
            count += 3.0 * static_cast<double>(target.size());
        }
    }
    return errors / count;
}

}  // namespace tasks
}  // namespace galattice
