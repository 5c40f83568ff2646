#include "galattice/transfer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "galattice/model.hpp"
#include "galattice/parallel.hpp"
#include "galattice/random.hpp"

namespace galattice::transfer {

namespace {

constexpr std::string_view kScratch = "scratch";
constexpr char kRowsHeader[] = "source,target,fraction,arm,replica,best_metric";

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

HeadConfig head_for(const Setup& setup, const data::CloudDataset& data) {
    HeadConfig head = setup.head;
    head.n_classes = data.n_classes();
    return head;
}

using RowKey = std::tuple<std::string, std::string, double, int, std::size_t>;

RowKey key_of(const TransferRow& r) {
    return {r.source, std::string(task_id(r.target)), r.fraction, static_cast<int>(r.arm), r.replica};
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("malformed " + what + " '" + s + "'");
    }
}

}  // namespace

std::string_view arm_name(Arm arm) {
    switch (arm) {
        case Arm::Frozen: return "frozen";
        case Arm::FineTune: return "finetune";
        case Arm::Scratch: return "scratch";
    }
    return "";
}

Arm parse_arm(std::string_view name) {
    for (Arm a : {Arm::Frozen, Arm::FineTune, Arm::Scratch})
        if (arm_name(a) == name) return a;
    throw std::invalid_argument("unknown transfer arm '" + std::string(name) + "'");
}

bool valid_fraction(double fraction) {
    return std::find(kFractions.begin(), kFractions.end(), fraction) != kFractions.end();
}

std::size_t subset_size(double fraction, std::size_t n) {
    if (n == 0) throw std::invalid_argument("cannot subsample an empty training set");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("data fraction " + format_double(fraction) + " outside (0, 1]");
    const auto m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(m, 1, n);
}

std::vector<std::size_t> sample_subset(const std::vector<std::size_t>& pool, double fraction, std::uint64_t seed) {
    const std::size_t m = subset_size(fraction, pool.size());
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    order.resize(m);
    std::sort(order.begin(), order.end());
    std::vector<std::size_t> out;
    out.reserve(m);
    for (std::size_t i : order) out.push_back(pool[i]);
    return out;
}

void validate(const TransferSpec& spec) {
    if (!valid_fraction(spec.fraction))
        throw std::invalid_argument("data fraction " + format_double(spec.fraction) + " is not one of 1e-4, 1e-3, 1e-2, 1e-1, 1");
    if (spec.replicas == 0) throw std::invalid_argument("replica count must be at least 1");
    if (spec.arm == Arm::Scratch && spec.source)
        throw std::invalid_argument("the scratch arm has no source task");
    if (spec.arm != Arm::Scratch && !spec.source)
        throw std::invalid_argument(std::string("the ") + std::string(arm_name(spec.arm)) + " arm needs a source task");
}

std::pair<double, double> mean_and_standard_error(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("no values to aggregate");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

std::uint64_t subset_seed(std::uint64_t seed, TaskKind target, double fraction, std::size_t replica) {
    return mix_seed({seed, hash_string("subset"), hash_string(task_id(target)), std::bit_cast<std::uint64_t>(fraction),
                     replica});
}

std::uint64_t head_seed(std::uint64_t seed, TaskKind target, double fraction, std::size_t replica) {
    return mix_seed({seed, hash_string("head"), hash_string(task_id(target)), std::bit_cast<std::uint64_t>(fraction),
                     replica});
}

std::uint64_t pretrain_seed(std::uint64_t seed, TaskKind task) {
    return mix_seed({seed, hash_string("pretrain"), hash_string(task_id(task))});
}

ModelParams pretrain(TaskKind task, const data::CloudDataset& data, const Setup& setup, std::uint64_t seed,
                     const std::filesystem::path& checkpoint) {
    ModelParams model = model::init_model(task, setup.net, head_for(setup, data), seed);
    train::TrainConfig cfg = setup.pretrain;
    cfg.seed = seed;
    train::TrainResult r = train::train(std::move(model), data, data.train_indices(), data.validation_indices(), cfg);
    if (!checkpoint.empty()) {
        if (checkpoint.has_parent_path()) std::filesystem::create_directories(checkpoint.parent_path());
        save_checkpoint(r.model, checkpoint);
    }
    return std::move(r.model);
}

TransferRow fine_tune(const ModelParams* source, const TransferSpec& spec, std::size_t replica,
                      const data::CloudDataset& data, const Setup& setup, ModelParams* trained) {
    validate(spec);
    const HeadConfig head = head_for(setup, data);
    const std::uint64_t hseed = head_seed(spec.seed, spec.target, spec.fraction, replica);

    ModelParams model;
    if (spec.arm == Arm::Scratch) {
        model = model::init_model(spec.target, setup.net, head, hseed);
    } else {
        if (!source) throw std::invalid_argument("fine-tuning needs a pretrained source model");
        if (source->task != *spec.source)
            throw std::invalid_argument("source checkpoint was trained on '" + std::string(task_id(source->task)) +
                                        "', expected '" + std::string(task_id(*spec.source)) + "'");
        model = *source;
        model::reinit_head(model, spec.target, head, hseed);
        if (spec.arm == Arm::Frozen) model.params.set_trainable_prefix("core.", false);
    }

    const auto subset = sample_subset(data.train_indices(), spec.fraction,
                                      subset_seed(spec.seed, spec.target, spec.fraction, replica));
    train::TrainConfig cfg = setup.finetune;
    cfg.seed = hseed;
    cfg.loss_log.clear();
    train::TrainResult r = train::train(std::move(model), data, subset, data.validation_indices(), cfg);
    if (trained) *trained = std::move(r.last);

    TransferRow row;
    row.source = spec.source ? std::string(task_id(*spec.source)) : std::string(kScratch);
    row.target = spec.target;
    row.fraction = spec.fraction;
    row.arm = spec.arm;
    row.replica = replica;
    row.best_metric = r.best_metric;
    return row;
}

TransferResult run_cell(const ModelParams* source, const TransferSpec& spec, const data::CloudDataset& data,
                        const Setup& setup) {
    validate(spec);
    TransferResult result;
    result.spec = spec;
    for (std::size_t r = 0; r < spec.replicas; ++r)
        result.best_metric.push_back(fine_tune(source, spec, r, data, setup).best_metric);
    std::tie(result.mean, result.standard_error) = mean_and_standard_error(result.best_metric);
    return result;
}

std::size_t expected_rows(const GridSpec& grid) {
    return grid.targets.size() * grid.fractions.size() * grid.replicas *
           (2 * grid.sources.size() + (grid.scratch ? 1 : 0));
}

std::vector<TransferRow> transfer_matrix(const GridSpec& grid, const data::CloudDataset& data, const Setup& setup) {
    if (grid.replicas == 0) throw std::invalid_argument("replica count must be at least 1");
    for (double f : grid.fractions)
        if (!valid_fraction(f))
            throw std::invalid_argument("data fraction " + format_double(f) + " is not one of 1e-4, 1e-3, 1e-2, 1e-1, 1");

    // cells in canonical order
    struct Job {
        TransferSpec spec;
        std::size_t replica;
    };
    std::vector<Job> jobs;
    for (TaskKind target : grid.targets)
        for (double f : grid.fractions) {
            std::vector<TransferSpec> specs;
            for (TaskKind s : grid.sources)
                for (Arm a : {Arm::Frozen, Arm::FineTune}) specs.push_back({s, target, f, a, grid.replicas, grid.seed});
            if (grid.scratch) specs.push_back({std::nullopt, target, f, Arm::Scratch, grid.replicas, grid.seed});
            for (const auto& spec : specs)
                for (std::size_t r = 0; r < grid.replicas; ++r) jobs.push_back({spec, r});
        }

    std::map<RowKey, TransferRow> done;
    if (!grid.rows_csv.empty() && std::filesystem::exists(grid.rows_csv))
        for (const auto& row : read_rows_csv(grid.rows_csv)) done[key_of(row)] = row;

    std::vector<const Job*> pending;
    for (const auto& job : jobs) {
        TransferRow probe;
        probe.source = job.spec.source ? std::string(task_id(*job.spec.source)) : std::string(kScratch);
        probe.target = job.spec.target;
        probe.fraction = job.spec.fraction;
        probe.arm = job.spec.arm;
        probe.replica = job.replica;
        if (!done.count(key_of(probe))) pending.push_back(&job);
    }

    std::map<TaskKind, ModelParams> sources;
    for (TaskKind s : grid.sources) {
        bool needed = false;
        for (const Job* j : pending) needed = needed || (j->spec.source && *j->spec.source == s);
        if (!needed) continue;
        std::filesystem::path ckpt;
        if (!grid.checkpoint_dir.empty())
            ckpt = grid.checkpoint_dir / ("pretrain-" + std::string(task_id(s)) + ".ckpt");
        if (!ckpt.empty() && std::filesystem::exists(ckpt)) {
            ModelParams m = load_checkpoint(ckpt);
            if (m.task != s)
                throw std::runtime_error("cached checkpoint " + ckpt.string() + " holds task '" +
                                         std::string(task_id(m.task)) + "'");
            sources.emplace(s, std::move(m));
        } else {
            sources.emplace(s, pretrain(s, data, setup, pretrain_seed(grid.seed, s), ckpt));
        }
    }

    // rewrite the log without any partial trailing line before appending
    std::ofstream log;
    if (!grid.rows_csv.empty()) {
        std::vector<TransferRow> kept;
        for (const auto& [k, row] : done) kept.push_back(row);
        write_rows_csv(kept, grid.rows_csv);
        log.open(grid.rows_csv, std::ios::app);
        if (!log) throw std::runtime_error("cannot append to " + grid.rows_csv.string());
    }

    Setup cell_setup = setup;
    const bool parallel_cells = grid.threads > 1 && pending.size() > 1;
    if (parallel_cells) cell_setup.finetune.threads = 1;
    std::mutex mu;
    parallel_for(pending.size(), parallel_cells ? grid.threads : 1, [&](std::size_t i, std::size_t) {
        const Job& job = *pending[i];
        const ModelParams* src = job.spec.source ? &sources.at(*job.spec.source) : nullptr;
        TransferRow row = fine_tune(src, job.spec, job.replica, data, cell_setup);
        std::lock_guard<std::mutex> lock(mu);
        if (log.is_open()) {
            log << row.source << ',' << task_id(row.target) << ',' << format_double(row.fraction) << ','
                << arm_name(row.arm) << ',' << row.replica << ',' << format_double(row.best_metric) << '\n';
            log.flush();
        }
        done[key_of(row)] = std::move(row);
    });
    if (log.is_open()) log.close();

    std::vector<TransferRow> rows;
    rows.reserve(jobs.size());
    for (const auto& job : jobs) {
        TransferRow probe;
        probe.source = job.spec.source ? std::string(task_id(*job.spec.source)) : std::string(kScratch);
        probe.target = job.spec.target;
        probe.fraction = job.spec.fraction;
        probe.arm = job.spec.arm;
        probe.replica = job.replica;
        rows.push_back(done.at(key_of(probe)));
    }
    if (!grid.rows_csv.empty()) write_rows_csv(rows, grid.rows_csv);
    if (!grid.summary_csv.empty()) write_summary_csv(rows, grid.summary_csv);
    return rows;
}

void write_rows_csv(const std::vector<TransferRow>& rows, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << kRowsHeader << '\n';
    for (const auto& r : rows)
        os << r.source << ',' << task_id(r.target) << ',' << format_double(r.fraction) << ',' << arm_name(r.arm) << ','
           << r.replica << ',' << format_double(r.best_metric) << '\n';
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<TransferRow> read_rows_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (std::size_t nl; (nl = text.find('\n', start)) != std::string::npos; start = nl + 1)
        lines.push_back(text.substr(start, nl - start));
    // an unterminated last line is an interrupted write and is dropped

    std::vector<TransferRow> rows;
    if (lines.empty()) return rows;
    if (lines.front() != kRowsHeader) throw std::runtime_error("unexpected header in " + path.string());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_csv(lines[i]);
        if (f.size() != 6) throw std::runtime_error("malformed transfer row '" + lines[i] + "'");
        TransferRow r;
        r.source = f[0];
        if (r.source != kScratch) parse_task(r.source);
        r.target = parse_task(f[1]);
        r.fraction = parse_double(f[2], "fraction");
        r.arm = parse_arm(f[3]);
        r.replica = static_cast<std::size_t>(parse_double(f[4], "replica"));
        r.best_metric = parse_double(f[5], "best metric");
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_summary_csv(const std::vector<TransferRow>& rows, const std::filesystem::path& path) {
    std::vector<std::tuple<std::string, std::string, double, Arm>> order;
    std::map<std::tuple<std::string, std::string, double, int>, std::vector<double>> groups;
    for (const auto& r : rows) {
        const std::string target(task_id(r.target));
        auto& g = groups[{r.source, target, r.fraction, static_cast<int>(r.arm)}];
        if (g.empty()) order.emplace_back(r.source, target, r.fraction, r.arm);
        g.push_back(r.best_metric);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "source,target,fraction,arm,replicas,mean,stderr\n";
    for (const auto& [source, target, fraction, arm] : order) {
        const auto& g = groups.at({source, target, fraction, static_cast<int>(arm)});
        const auto [mean, se] = mean_and_standard_error(g);
        os << source << ',' << target << ',' << format_double(fraction) << ',' << arm_name(arm) << ',' << g.size()
           << ',' << format_double(mean) << ',' << format_double(se) << '\n';
    }
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace galattice::transfer
