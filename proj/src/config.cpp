#include "galattice/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace galattice::config {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError("invalid value '" + std::string(value) + "' for '" + std::string(key) + "' (expected " +
                      std::string(expected) + ")");
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
    return out;
}

double parse_real(std::string_view key, std::string_view v) {
    const std::string s(v);
    char* end = nullptr;
    const double out = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || std::isnan(out)) bad_value(key, v, "a number");
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, v, "true or false");
}

std::vector<std::string> parse_list(std::string_view v) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto end = comma == std::string_view::npos ? v.size() : comma;
        std::string item = trim(v.substr(start, end - start));
        if (!item.empty()) out.push_back(std::move(item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

template <class T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& f) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + f(items[i]);
    return out;
}

struct Entry {
    std::string key;
    std::function<void(RunConfig&, std::string_view, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class Access>
Entry count(std::string key, Access field, std::uint64_t minimum = 0) {
    return {std::move(key),
            [field, minimum](RunConfig& c, std::string_view k, std::string_view v) {
                const auto x = parse_u64(k, v);
                if (x < minimum) bad_value(k, v, "an integer >= " + std::to_string(minimum));
                field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(x);
            },
            [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); }};
}

template <class Access>
Entry real(std::string key, Access field) {
    return {std::move(key), [field](RunConfig& c, std::string_view k, std::string_view v) { field(c) = parse_real(k, v); },
            [field](const RunConfig& c) { return format_real(field(const_cast<RunConfig&>(c))); }};
}

template <class Access>
Entry text(std::string key, Access field) {
    return {std::move(key), [field](RunConfig& c, std::string_view, std::string_view v) { field(c) = std::string(v); },
            [field](const RunConfig& c) { return std::string(field(const_cast<RunConfig&>(c))); }};
}

template <class Access>
Entry path(std::string key, Access field) {
    return {std::move(key), [field](RunConfig& c, std::string_view, std::string_view v) { field(c) = std::string(v); },
            [field](const RunConfig& c) { return field(const_cast<RunConfig&>(c)).string(); }};
}

template <class Access>
Entry flag(std::string key, Access field) {
    return {std::move(key), [field](RunConfig& c, std::string_view k, std::string_view v) { field(c) = parse_bool(k, v); },
            [field](const RunConfig& c) { return std::string(field(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <class Access>
Entry strings(std::string key, Access field) {
    return {std::move(key), [field](RunConfig& c, std::string_view, std::string_view v) { field(c) = parse_list(v); },
            [field](const RunConfig& c) {
                return join<std::string>(field(const_cast<RunConfig&>(c)), [](const std::string& s) { return s; });
            }};
}

template <class Access>
Entry reals(std::string key, Access field) {
    return {std::move(key),
            [field](RunConfig& c, std::string_view k, std::string_view v) {
                std::vector<double> out;
                for (const auto& item : parse_list(v)) out.push_back(parse_real(k, item));
                field(c) = std::move(out);
            },
            [field](const RunConfig& c) {
                return join<double>(field(const_cast<RunConfig&>(c)), [](const double& x) { return format_real(x); });
            }};
}

template <class Access>
Entry paths(std::string key, Access field) {
    return {std::move(key),
            [field](RunConfig& c, std::string_view, std::string_view v) {
                std::vector<std::filesystem::path> out;
                for (const auto& item : parse_list(v)) out.emplace_back(item);
                field(c) = std::move(out);
            },
            [field](const RunConfig& c) {
                return join<std::filesystem::path>(field(const_cast<RunConfig&>(c)),
                                                   [](const std::filesystem::path& p) { return p.string(); });
            }};
}

#define FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = [] {
        std::vector<Entry> e;
        e.push_back(count("run.seed", FIELD(seed)));
        e.push_back(count("run.threads", FIELD(threads), 1));
        e.push_back(path("run.out", FIELD(out)));

        e.push_back(strings("data.prototypes", FIELD(data.prototypes)));
        e.push_back(paths("data.structure_files", FIELD(data.structure_files)));
        e.push_back(reals("data.noise_levels", FIELD(data.noise_levels)));
        e.push_back(count("data.replicas", FIELD(data.replicas), 1));
        e.push_back(count("data.clouds_per_class", FIELD(data.clouds_per_class), 1));
        e.push_back(count("data.k", FIELD(data.k), 1));
        e.push_back(count("data.min_particles", FIELD(data.min_particles), 1));
        e.push_back(real("data.validation_fraction", FIELD(data.validation_fraction)));
        e.push_back(path("data.dataset", FIELD(dataset)));

        e.push_back(count("model.width", FIELD(net.width), 1));
        e.push_back(count("model.hidden", FIELD(net.hidden), 1));
        e.push_back(count("model.blocks", FIELD(net.blocks), 1));
        e.push_back(count("model.types", FIELD(net.n_types), 1));
        e.push_back(count("model.latent", FIELD(head.latent), 1));
        e.push_back(count("model.decoder_tokens", FIELD(head.decoder_tokens), 1));

        e.push_back({"train.task",
                     [](RunConfig& c, std::string_view k, std::string_view v) {
                         try {
                             c.task = parse_task(v);
                         } catch (const std::invalid_argument&) {
                             bad_value(k, v, "one of frame, noisy, autoencoder, denoising, nearest, shift");
                         }
                     },
                     [](const RunConfig& c) { return std::string(task_id(c.task)); }});
        e.push_back(real("train.learning_rate", FIELD(train.adam.learning_rate)));
        e.push_back(real("train.beta1", FIELD(train.adam.beta1)));
        e.push_back(real("train.beta2", FIELD(train.adam.beta2)));
        e.push_back(real("train.adam_epsilon", FIELD(train.adam.epsilon)));
        e.push_back(count("train.batch_size", FIELD(train.batch_size), 1));
        e.push_back(count("train.accumulation", FIELD(train.accumulation), 1));
        e.push_back(count("train.dynamic_train_batches", FIELD(train.dynamic_train_batches), 1));
        e.push_back(count("train.dynamic_val_batches", FIELD(train.dynamic_val_batches), 1));
        e.push_back(count("train.max_epochs", FIELD(train.max_epochs), 1));
        e.push_back(real("train.target_metric", FIELD(train.target_metric)));
        e.push_back(real("train.noise_std", FIELD(train.task.noise_std)));
        e.push_back(real("train.kl_weight", FIELD(train.task.beta)));

        e.push_back(strings("transfer.sources", FIELD(transfer.sources)));
        e.push_back(strings("transfer.targets", FIELD(transfer.targets)));
        e.push_back(reals("transfer.fractions", FIELD(transfer.fractions)));
        e.push_back(count("transfer.replicas", FIELD(transfer.replicas), 1));
        e.push_back(flag("transfer.scratch", FIELD(transfer.scratch)));
        e.push_back(count("transfer.pretrain_epochs", FIELD(transfer.pretrain_epochs), 1));

        e.push_back(path("embed.checkpoint", FIELD(embed.checkpoint)));

        e.push_back(path("zero_shot.checkpoint", FIELD(zero_shot.checkpoint)));
        e.push_back(strings("zero_shot.pairs", FIELD(zero_shot.pairs)));
        e.push_back(strings("zero_shot.methods", FIELD(zero_shot.methods)));
        e.push_back(count("zero_shot.min_particles", FIELD(zero_shot.min_particles), 1));
        e.push_back(count("zero_shot.max_particles", FIELD(zero_shot.max_particles)));

        e.push_back(path("phase_hist.checkpoint", FIELD(phase_hist.checkpoint)));
        e.push_back(path("phase_hist.trajectory", FIELD(phase_hist.trajectory)));
        e.push_back(count("phase_hist.stride", FIELD(phase_hist.stride), 1));
        e.push_back(count("phase_hist.clouds_per_frame", FIELD(phase_hist.clouds_per_frame), 1));
        e.push_back(count("phase_hist.max_particles", FIELD(phase_hist.max_particles)));

        e.push_back(text("featurize.method", FIELD(featurize.method)));
        e.push_back(text("featurize.format", FIELD(featurize.format)));

        e.push_back(text("potential.preset", FIELD(potential.preset)));
        e.push_back({"potential.kind",
                     [](RunConfig& c, std::string_view k, std::string_view v) {
                         if (v == "opp") c.potential.params.kind = potentials::Kind::OPP;
                         else if (v == "ljg") c.potential.params.kind = potentials::Kind::LJG;
                         else bad_value(k, v, "opp or ljg");
                     },
                     [](const RunConfig& c) {
                         return std::string(c.potential.params.kind == potentials::Kind::OPP ? "opp" : "ljg");
                     }});
        e.push_back(real("potential.k", FIELD(potential.params.k)));
        e.push_back(real("potential.phi", FIELD(potential.params.phi)));
        e.push_back(real("potential.r0", FIELD(potential.params.r0)));
        e.push_back(real("potential.epsilon", FIELD(potential.params.epsilon)));
        e.push_back(real("potential.sigma", FIELD(potential.params.sigma)));
        e.push_back(real("potential.cutoff", FIELD(potential.params.cutoff)));
        e.push_back(real("potential.r_min", FIELD(potential.r_min)));
        e.push_back(real("potential.r_max", FIELD(potential.r_max)));
        e.push_back(count("potential.points", FIELD(potential.points), 2));
        return e;
    }();
    return entries;
}

#undef FIELD

const Entry& find(std::string_view key) {
    for (const auto& e : registry())
        if (e.key == key) return e;
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

std::vector<std::string> known_keys() {
    std::vector<std::string> out;
    for (const auto& e : registry()) out.push_back(e.key);
    return out;
}

void set_value(RunConfig& config, std::string_view key, std::string_view value) {
    find(key).set(config, key, trim(value));
}

std::string get_value(const RunConfig& config, std::string_view key) { return find(key).get(config); }

void apply_text(RunConfig& config, std::string_view text, std::string_view origin) {
    std::string section;
    std::size_t line_no = 0;
    std::istringstream is{std::string(text)};
    std::string raw;
    while (std::getline(is, raw)) {
        ++line_no;
        const auto cut = raw.find_first_of("#;");
        const std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
        if (line.empty()) continue;
        const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "malformed section header '" + line + "'");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + line + "'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw ConfigError(where + "missing key before '='");
        const std::string full = section.empty() ? key : section + "." + key;
        try {
            set_value(config, full, std::string_view(line).substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    apply_text(base, ss.str(), path.string());
    return base;
}

std::string to_text(const RunConfig& config) {
    std::string out;
    std::string section;
    for (const auto& e : registry()) {
        const auto dot = e.key.find('.');
        const std::string s = e.key.substr(0, dot);
        if (s != section) {
            out += (section.empty() ? "[" : "\n[") + s + "]\n";
            section = s;
        }
        out += e.key.substr(dot + 1) + " = " + e.get(config) + "\n";
    }
    return out;
}

void write_resolved(const RunConfig& config, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << to_text(config);
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace galattice::config
