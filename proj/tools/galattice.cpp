#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "galattice/config.hpp"
#include "galattice/evaluation.hpp"
#include "galattice/features.hpp"
#include "galattice/model.hpp"
#include "galattice/random.hpp"
#include "galattice/structure.hpp"
#include "galattice/structure_io.hpp"

using namespace galattice;
using config::ConfigError;
using config::RunConfig;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void announce(const std::filesystem::path& p) { std::cout << "wrote " << p.string() << '\n'; }

data::CloudDataset load_or_generate(const RunConfig& c) {
    if (!c.dataset.empty()) return data::load_dataset(c.dataset);
    data::DatasetSpec spec = c.data;
    spec.seed = c.seed;
    return data::generate_dataset(spec, c.threads);
}

ModelParams load_model(const std::filesystem::path& path, std::string_view key) {
    if (path.empty()) throw ConfigError("'" + std::string(key) + "' must name a checkpoint");
    return load_checkpoint(path);
}

train::TrainConfig train_config(const RunConfig& c) {
    train::TrainConfig t = c.train;
    t.seed = c.seed;
    t.threads = c.threads;
    t.dump_dir = c.out;
    return t;
}

void progress(const train::EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss << " metric "
              << r.val_metric << " lr " << r.learning_rate << '\n';
}

void cmd_gen_data(const RunConfig& c) {
    const auto d = load_or_generate(c);
    announce(data::save_dataset(d, c.out / "dataset"));
    announce(c.out / "dataset.bin");
}

void cmd_train(const RunConfig& c) {
    const auto d = load_or_generate(c);
    HeadConfig head = c.head;
    head.n_classes = d.n_classes();
    ModelParams m = model::init_model(c.task, c.net, head, c.seed);
    train::TrainConfig t = train_config(c);
    t.loss_log = c.out / "loss.csv";
    const auto r = train::train(std::move(m), d, d.train_indices(), d.validation_indices(), t, progress);
    save_checkpoint(r.model, c.out / "model.ckpt");
    save_checkpoint(r.last, c.out / "last.ckpt");
    announce(c.out / "model.ckpt");
    announce(c.out / "last.ckpt");
    announce(t.loss_log);
    std::cout << "best_metric " << fmt(r.best_metric) << " best_epoch " << r.best_epoch << '\n';
}

void cmd_embed(const RunConfig& c) {
    const ModelParams m = load_model(c.embed.checkpoint, "embed.checkpoint");
    const auto d = load_or_generate(c);
    const auto e = eval::embed(m, d.clouds, c.threads);
    const auto path = c.out / "embeddings.csv";
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "cloud,source,noise,replica,particle,label,split";
    for (Eigen::Index j = 0; j < e.rows.cols(); ++j) os << ",e" << j;
    os << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& r = d.records[i];
        os << i << ',' << r.source << ',' << fmt(r.noise) << ',' << r.replica << ',' << r.particle << ',' << r.label
           << ',' << (r.validation ? "validation" : "train");
        for (Eigen::Index j = 0; j < e.rows.cols(); ++j) os << ',' << fmt(e.rows(static_cast<Eigen::Index>(i), j));
        os << '\n';
    }
    if (!os) throw std::runtime_error("failed writing " + path.string());
    announce(path);
}

structure::Configuration snapshot(const std::string& side, const RunConfig& c) {
    // <source>[@noise[@replica]]
    std::string source = side;
    double noise = 0.0;
    std::size_t replica = 0;
    const auto at = side.find('@');
    if (at != std::string::npos) {
        source = side.substr(0, at);
        const std::string rest = side.substr(at + 1);
        const auto at2 = rest.find('@');
        try {
            noise = std::stod(rest.substr(0, at2));
            if (at2 != std::string::npos) replica = std::stoul(rest.substr(at2 + 1));
        } catch (const std::exception&) {
            throw ConfigError("malformed snapshot '" + side + "' in 'zero_shot.pairs'");
        }
    }
    structure::Configuration config;
    const auto& builtin = structure::builtin_prototypes();
    const auto colon = source.rfind(':');
    if (std::find(builtin.begin(), builtin.end(), source) != builtin.end()) {
        config = structure::replicate(structure::build_prototype(source), c.zero_shot.min_particles);
    } else if (colon != std::string::npos && std::filesystem::exists(source.substr(0, colon))) {
        const auto frames = structure::load_trajectory(source.substr(0, colon));
        std::size_t index = 0;
        try {
            index = std::stoul(source.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("malformed frame index in snapshot '" + side + "'");
        }
        if (index >= frames.size())
            throw ConfigError("snapshot '" + side + "' asks for frame " + std::to_string(index) + " of " +
                              std::to_string(frames.size()));
        config = frames[index].config;
    } else if (std::filesystem::exists(source)) {
        config = structure::replicate(structure::load_structure(source), c.zero_shot.min_particles);
    } else {
        throw ConfigError("snapshot source '" + source + "' is neither a built-in prototype nor a file");
    }
    if (noise > 0.0) config = structure::add_thermal_noise(config, noise, derive_seed(c.seed, source, noise, replica));
    return config;
}

void cmd_zero_shot(const RunConfig& c) {
    std::vector<eval::SnapshotPair> pairs;
    for (const auto& p : c.zero_shot.pairs) {
        const auto bar = p.find('|');
        if (bar == std::string::npos) throw ConfigError("zero-shot pair '" + p + "' lacks a '|'");
        pairs.push_back({p, snapshot(p.substr(0, bar), c), snapshot(p.substr(bar + 1), c)});
    }
    std::vector<std::pair<std::string, eval::Featurizer>> methods;
    for (const auto& name : c.zero_shot.methods) {
        if (name == "model") {
            auto m = std::make_shared<ModelParams>(load_model(c.zero_shot.checkpoint, "zero_shot.checkpoint"));
            const std::size_t threads = c.threads;
            methods.emplace_back(std::string(task_id(m->task)),
                                 [m, threads](const std::vector<PointCloud>& clouds) {
                                     return eval::embed(*m, clouds, threads).rows;
                                 });
            continue;
        }
        features::Method method;
        try {
            method = features::parse_method(name);
        } catch (const std::invalid_argument&) {
            throw ConfigError("invalid value '" + name + "' for 'zero_shot.methods'");
        }
        const std::size_t threads = c.threads;
        methods.emplace_back(name, [method, threads](const std::vector<PointCloud>& clouds) {
            const auto rows = features::featurize_all(method, clouds, threads);
            eval::Matrix out(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(features::method_dim(method)));
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t j = 0; j < rows[i].size(); ++j)
                    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
            return out;
        });
    }
    std::vector<eval::ZeroShotRow> rows;
    for (const auto& pair : pairs)
        for (const auto& [name, f] : methods) {
            const auto roc = eval::zero_shot_pair(f, pair, c.data.k, c.zero_shot.max_particles, c.seed, c.threads);
            std::cerr << pair.label << ' ' << name << " auc " << roc.auc << '\n';
            rows.push_back({pair.label, name, roc});
        }
    eval::write_zero_shot_csv(rows, c.out / "zero_shot.csv");
    announce(c.out / "zero_shot.csv");
}

void cmd_transfer(const RunConfig& c) {
    const auto d = load_or_generate(c);
    transfer::GridSpec grid;
    try {
        for (const auto& s : c.transfer.sources) grid.sources.push_back(parse_task(s));
        for (const auto& s : c.transfer.targets) grid.targets.push_back(parse_task(s));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("transfer task list: ") + e.what());
    }
    for (double f : c.transfer.fractions)
        if (!transfer::valid_fraction(f))
            throw ConfigError("invalid value '" + fmt(f) + "' in 'transfer.fractions' (expected 1e-4, 1e-3, 1e-2, 0.1 or 1)");
    grid.fractions = c.transfer.fractions;
    grid.replicas = c.transfer.replicas;
    grid.scratch = c.transfer.scratch;
    grid.seed = c.seed;
    grid.threads = c.threads;
    grid.rows_csv = c.out / "transfer_rows.csv";
    grid.summary_csv = c.out / "transfer_summary.csv";
    grid.checkpoint_dir = c.out / "pretrained";

    transfer::Setup setup;
    setup.net = c.net;
    setup.head = c.head;
    setup.pretrain = train_config(c);
    setup.pretrain.max_epochs = c.transfer.pretrain_epochs;
    setup.finetune = train_config(c);
    const auto rows = transfer::transfer_matrix(grid, d, setup);
    std::cout << rows.size() << " rows\n";
    announce(grid.rows_csv);
    announce(grid.summary_csv);
}

void cmd_phase_hist(const RunConfig& c) {
    if (c.phase_hist.trajectory.empty()) throw ConfigError("'phase_hist.trajectory' must name a trajectory file");
    const auto frames = structure::load_trajectory(c.phase_hist.trajectory);
    ModelParams m;
    if (!c.phase_hist.checkpoint.empty()) {
        m = load_checkpoint(c.phase_hist.checkpoint);
    } else {
        const auto d = eval::trajectory_dataset(frames, c.phase_hist.stride, c.phase_hist.clouds_per_frame, c.data.k,
                                                c.data.validation_fraction, c.seed, c.threads);
        HeadConfig head = c.head;
        head.n_classes = d.n_classes();
        train::TrainConfig t = train_config(c);
        t.loss_log = c.out / "phase_loss.csv";
        auto r = train::train(model::init_model(TaskKind::FrameClassification, c.net, head, c.seed), d,
                              d.train_indices(), d.validation_indices(), t, progress);
        m = std::move(r.model);
        save_checkpoint(m, c.out / "phase_classifier.ckpt");
        announce(c.out / "phase_classifier.ckpt");
        announce(t.loss_log);
    }
    const auto h = eval::frame_histogram(m, frames, c.phase_hist.stride, c.data.k, c.phase_hist.max_particles, c.seed,
                                         c.threads);
    eval::write_frame_histogram_csv(h, c.out / "phase_hist.csv");
    announce(c.out / "phase_hist.csv");
}

void cmd_featurize(const RunConfig& c) {
    features::Method method;
    try {
        method = features::parse_method(c.featurize.method);
    } catch (const std::invalid_argument&) {
        throw ConfigError("invalid value '" + c.featurize.method + "' for 'featurize.method' (expected q, psi or radial)");
    }
    if (c.featurize.format != "csv" && c.featurize.format != "binary")
        throw ConfigError("invalid value '" + c.featurize.format + "' for 'featurize.format' (expected csv or binary)");
    const auto d = load_or_generate(c);
    const auto rows = features::featurize_all(method, d.clouds, c.threads);
    const std::string name = "features_" + std::string(features::method_name(method));
    if (c.featurize.format == "csv") {
        features::write_matrix_csv(rows, c.out / (name + ".csv"));
        announce(c.out / (name + ".csv"));
    } else {
        features::write_matrix_binary(rows, c.out / (name + ".bin"));
        announce(c.out / (name + ".bin"));
    }
}

void cmd_potential_table(const RunConfig& c) {
    potentials::PotentialParams p = c.potential.params;
    if (!c.potential.preset.empty()) {
        try {
            p = potentials::preset(c.potential.preset);
        } catch (const std::invalid_argument&) {
            throw ConfigError("invalid value '" + c.potential.preset + "' for 'potential.preset'");
        }
    }
    const auto path = c.out / "potential.csv";
    potentials::write_table_csv(p, c.potential.r_min, c.potential.r_max, c.potential.points, path);
    announce(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"galattice: geometric algebra attention networks for particle structures"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::vector<std::string> overrides;
    auto* seed_opt = app.add_option("--seed", seed, "Global seed");
    auto* out_opt = app.add_option("--out", out, "Output directory");
    auto* threads_opt = app.add_option("--threads", threads, "Worker threads (fallback: GALATTICE_THREADS)");
    app.add_option("--config", config_path, "Config file (key = value with [section] headers)");
    app.add_option("--set", overrides, "Override one key, section.key=value");

    std::vector<std::string> prototypes;
    std::vector<double> noise;
    std::string task, method, preset, checkpoint, trajectory;

    auto* gen = app.add_subcommand("gen-data", "Generate a prototype cloud dataset");
    auto* proto_opt = gen->add_option("--prototype", prototypes, "Built-in prototype (repeatable)");
    auto* noise_opt = gen->add_option("--noise", noise, "Noise level in sigma0 (repeatable)");
    auto* tr = app.add_subcommand("train", "Train one task");
    auto* task_opt = tr->add_option("--task", task, "frame, noisy, autoencoder, denoising, nearest or shift");
    auto* emb = app.add_subcommand("embed", "Write embeddings of a dataset");
    auto* emb_ckpt = emb->add_option("--checkpoint", checkpoint, "Model checkpoint");
    auto* zs = app.add_subcommand("zero-shot", "Score snapshot pairs by first principal component");
    auto* zs_ckpt = zs->add_option("--checkpoint", checkpoint, "Model checkpoint");
    auto* xfer = app.add_subcommand("transfer", "Run the transfer-learning grid");
    auto* ph = app.add_subcommand("phase-hist", "Frame-classification histogram over a trajectory");
    auto* ph_ckpt = ph->add_option("--checkpoint", checkpoint, "Classifier checkpoint");
    auto* ph_traj = ph->add_option("--trajectory", trajectory, "Trajectory file");
    auto* feat = app.add_subcommand("featurize", "Baseline feature vectors of a dataset");
    auto* method_opt = feat->add_option("--method", method, "q, psi or radial");
    auto* pot = app.add_subcommand("potential-table", "Tabulate a pair potential");
    auto* preset_opt = pot->add_option("--preset", preset, "Structure preset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    RunConfig c;
    try {
        if (!config_path.empty()) c = config::load_config(config_path);
        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + o + "'");
            config::set_value(c, o.substr(0, eq), o.substr(eq + 1));
        }
        if (seed_opt->count()) c.seed = seed;
        if (out_opt->count()) c.out = out;
        if (threads_opt->count()) {
            c.threads = threads;
        } else if (const char* env = std::getenv("GALATTICE_THREADS")) {
            config::set_value(c, "run.threads", env);
        }
        if (c.threads == 0) throw ConfigError("invalid value '0' for 'run.threads' (expected an integer >= 1)");
        if (proto_opt->count()) c.data.prototypes = prototypes;
        if (noise_opt->count()) c.data.noise_levels = noise;
        if (task_opt->count()) config::set_value(c, "train.task", task);
        if (method_opt->count()) c.featurize.method = method;
        if (preset_opt->count()) c.potential.preset = preset;
        if (emb_ckpt->count()) c.embed.checkpoint = checkpoint;
        if (zs_ckpt->count()) c.zero_shot.checkpoint = checkpoint;
        if (ph_ckpt->count()) c.phase_hist.checkpoint = checkpoint;
        if (ph_traj->count()) c.phase_hist.trajectory = trajectory;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    try {
        std::filesystem::create_directories(c.out);
        config::write_resolved(c, c.out / "resolved.cfg");
        if (gen->parsed()) cmd_gen_data(c);
        else if (tr->parsed()) cmd_train(c);
        else if (emb->parsed()) cmd_embed(c);
        else if (zs->parsed()) cmd_zero_shot(c);
        else if (xfer->parsed()) cmd_transfer(c);
        else if (ph->parsed()) cmd_phase_hist(c);
        else if (feat->parsed()) cmd_featurize(c);
        else if (pot->parsed()) cmd_potential_table(c);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
