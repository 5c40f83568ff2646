#include "galattice/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <random>

#include "galattice/model.hpp"
#include "galattice/parallel.hpp"
#include "galattice/random.hpp"

namespace galattice::train {

namespace {

class Worker {
public:
    model::TaskGraph& graph(const ModelParams& m, std::size_t k) {
        auto& g = graphs_[k];
        if (!g) g = std::make_unique<model::TaskGraph>(m, k);
        return *g;
    }

private:
    std::map<std::size_t, std::unique_ptr<model::TaskGraph>> graphs_;
};

tasks::TaskSample sample_of(TaskKind task, const data::CloudDataset& data, std::size_t index, std::uint64_t seed,
                            const TrainConfig& config) {
    return tasks::make_sample(task, data.clouds.at(index), data.records.at(index).label, seed, config.task);
}

[[noreturn]] void diverged(const ModelParams& model, const TrainConfig& config, std::size_t epoch) {
    const std::filesystem::path dir = config.dump_dir.empty() ? std::filesystem::path(".") : config.dump_dir;
    std::filesystem::create_directories(dir);
    const std::filesystem::path dump = dir / "diverged.ckpt";
    save_checkpoint(model, dump);
    throw TrainingDiverged("non-finite training loss in epoch " + std::to_string(epoch) + "; state written to " +
                           dump.string());
}

}  // namespace

std::vector<tasks::TaskSample> validation_samples(TaskKind task, const data::CloudDataset& data,
                                                  const std::vector<std::size_t>& indices, const TrainConfig& config) {
    if (indices.empty()) throw std::invalid_argument("validation set is empty");
    std::vector<tasks::TaskSample> out;
    if (is_static(task)) {
        for (std::size_t i : indices) out.push_back(sample_of(task, data, i, data.records.at(i).seed, config));
    } else {
        const std::size_t n = config.dynamic_val_batches * config.batch_size;
        for (std::size_t j = 0; j < n; ++j)
            out.push_back(sample_of(task, data, indices[j % indices.size()],
                                    mix_seed({config.seed, hash_string("validation"), j}), config));
    }
    return out;
}

Evaluation evaluate(const ModelParams& model, const std::vector<tasks::TaskSample>& samples, const TrainConfig& config) {
    if (samples.empty()) throw std::invalid_argument("cannot evaluate on an empty sample set");
    const std::size_t threads = std::max<std::size_t>(1, config.threads);
    std::vector<Worker> workers(threads);
    std::vector<double> losses(samples.size());
    std::vector<tasks::Prediction> predictions(samples.size());
    parallel_for(samples.size(), threads, [&](std::size_t i, std::size_t w) {
        losses[i] = workers[w].graph(model, samples[i].input.size()).run(model, samples[i], 0, false, &predictions[i],
                                                                         nullptr, config.task);
    });
    Evaluation e;
    for (double l : losses) e.loss += l;
    e.loss /= static_cast<double>(losses.size());
    e.metric = tasks::validation_metric(model.task, predictions, samples);
    return e;
}

TrainResult train(ModelParams model, const data::CloudDataset& data, const std::vector<std::size_t>& train_indices,
                  const std::vector<std::size_t>& val_indices, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    if (train_indices.empty()) throw std::invalid_argument("training set is empty");
    if (config.batch_size == 0 || config.accumulation == 0)
        throw std::invalid_argument("batch size and accumulation must be positive");
    if (model.task == TaskKind::FrameClassification && model.head.n_classes != data.n_classes())
        throw std::invalid_argument("model has " + std::to_string(model.head.n_classes) + " classes, dataset has " +
                                    std::to_string(data.n_classes()));
    const TaskKind task = model.task;
    const bool dynamic = !is_static(task);
    const std::size_t threads = std::max<std::size_t>(1, config.threads);
    const std::size_t batch = config.batch_size, window = config.accumulation;

    const auto val = validation_samples(task, data, val_indices, config);
    TrainResult result;
    result.initial = evaluate(model, val, config);
    result.model = model;

    OptimizerState opt(model.params, config.adam);
    LrSchedule schedule(dynamic ? ScheduleRegime::Dynamic : ScheduleRegime::Static, config.adam.learning_rate,
                        config.max_epochs);
    std::vector<Worker> workers(threads);
    std::vector<Gradients> batch_grads(window, Gradients(model.params));
    std::vector<double> batch_loss(window);

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        // cloud index and perturbation seed of every training draw this epoch
        std::vector<std::pair<std::size_t, std::uint64_t>> draws;
        std::mt19937_64 rng(mix_seed({config.seed, hash_string("epoch"), epoch}));
        if (dynamic) {
            std::uniform_int_distribution<std::size_t> pick(0, train_indices.size() - 1);
            const std::size_t n = config.dynamic_train_batches * batch;
            draws.reserve(n);
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t idx = train_indices[pick(rng)];
                draws.emplace_back(idx, mix_seed({config.seed, epoch, j}));
            }
        } else {
            std::vector<std::size_t> order = train_indices;
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t idx : order) draws.emplace_back(idx, data.records.at(idx).seed);
        }
        const std::size_t n_batches = (draws.size() + batch - 1) / batch;

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n_batches; start += window) {
            const std::size_t in_window = std::min(window, n_batches - start);
            parallel_for(in_window, threads, [&](std::size_t b, std::size_t w) {
                Gradients& g = batch_grads[b];
                g.zero();
                double l = 0.0;
                const std::size_t first = (start + b) * batch, last = std::min(first + batch, draws.size());
                for (std::size_t j = first; j < last; ++j) {
                    const tasks::TaskSample s = sample_of(task, data, draws[j].first, draws[j].second, config);
                    l += workers[w].graph(model, s.input.size()).run(
                        model, s, mix_seed({config.seed, hash_string("eta"), epoch, j}), true, nullptr, &g,
                        config.task);
                }
                batch_loss[b] = l;
            });
            for (std::size_t b = 0; b < in_window; ++b) {
                if (!std::isfinite(batch_loss[b])) diverged(model, config, epoch);
                loss_sum += batch_loss[b];
                const std::size_t first = (start + b) * batch;
                accumulate(opt, batch_grads[b], std::min(first + batch, draws.size()) - first);
            }
            apply_accumulated(opt, model.params);
            ++result.updates;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(draws.size());
        const Evaluation ev = evaluate(model, val, config);
        if (!std::isfinite(ev.loss)) diverged(model, config, epoch);
        rec.val_loss = ev.loss;
        rec.val_metric = ev.metric;
        rec.learning_rate = opt.learning_rate();
        result.history.push_back(rec);
        result.best_metric = std::min(result.best_metric, ev.metric);

        const ScheduleDecision d = schedule.update(ev.loss);
        if (d.improved) {
            result.best_loss = ev.loss;
            result.best_epoch = epoch;
            result.model = model;
        }
        opt.set_learning_rate(d.learning_rate);
        if (on_epoch) on_epoch(rec);
        if (!config.loss_log.empty()) write_loss_log(result.history, config.loss_log);
        if (d.stop || ev.metric <= config.target_metric) break;
    }
    result.last = std::move(model);
    return result;
}

void write_loss_log(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write loss log " + path.string());
    os << std::setprecision(17);
    os << "epoch,train_loss,val_loss,val_metric,lr\n";
    for (const EpochRecord& r : history)
        os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_metric << ',' << r.learning_rate
           << '\n';
}

}  // namespace galattice::train
