#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <unistd.h>

#include "galattice/config.hpp"

using namespace galattice;
using config::ConfigError;

namespace {

std::string error_of(const std::string& text) {
    config::RunConfig c;
    try {
        config::apply_text(c, text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("defaults resolve and reparse to the same text") {
    const config::RunConfig c;
    const std::string text = config::to_text(c);
    config::RunConfig back;
    back.seed = 99;
    back.data.k = 3;
    config::apply_text(back, text);
    CHECK(config::to_text(back) == text);
    CHECK(back.seed == 0);
    CHECK(back.data.k == 20);
    CHECK(std::isinf(back.train.target_metric));
    CHECK(back.train.target_metric < 0);

    const auto keys = config::known_keys();
    CHECK(std::set<std::string>(keys.begin(), keys.end()).size() == keys.size());
    for (const auto& k : keys) CHECK(text.find(k.substr(k.find('.') + 1) + " = ") != std::string::npos);
}

TEST_CASE("values parse into typed fields") {
    config::RunConfig c;
    config::apply_text(c, R"(
# comment line
[run]
seed = 7          ; trailing comment
threads = 3
out = results/a

[data]
prototypes = cI2-W, cF4-Cu
noise_levels = 0.01,0.03
k = 12
validation_fraction = 0.25

[train]
task = denoising
learning_rate = 5e-4
target_metric = 0.1

[transfer]
fractions = 0.01, 1
scratch = false

[zero_shot]
pairs = cF4-Cu@0.05@0|hP2-Mg@0.05@0

[potential]
kind = ljg
r0 = 1.8
)");
    CHECK(c.seed == 7);
    CHECK(c.threads == 3);
    CHECK(c.out == "results/a");
    CHECK(c.data.prototypes == std::vector<std::string>{"cI2-W", "cF4-Cu"});
    CHECK(c.data.noise_levels == std::vector<double>{0.01, 0.03});
    CHECK(c.data.k == 12);
    CHECK(c.data.validation_fraction == 0.25);
    CHECK(c.task == TaskKind::Denoising);
    CHECK(c.train.adam.learning_rate == 5e-4);
    CHECK(c.train.target_metric == 0.1);
    CHECK(c.transfer.fractions == std::vector<double>{0.01, 1.0});
    CHECK_FALSE(c.transfer.scratch);
    CHECK(c.zero_shot.pairs == std::vector<std::string>{"cF4-Cu@0.05@0|hP2-Mg@0.05@0"});
    CHECK(c.potential.params.kind == potentials::Kind::LJG);
    CHECK(c.potential.params.r0 == 1.8);

    config::RunConfig again;
    config::apply_text(again, config::to_text(c));
    CHECK(config::to_text(again) == config::to_text(c));
    CHECK(again.data.noise_levels == c.data.noise_levels);
}

TEST_CASE("doubles survive the resolved text bit for bit") {
    config::RunConfig c;
    c.train.adam.learning_rate = 0.1 + 0.2;
    c.potential.params.phi = std::nextafter(2.8, 3.0);
    config::RunConfig back;
    config::apply_text(back, config::to_text(c));
    CHECK(back.train.adam.learning_rate == c.train.adam.learning_rate);
    CHECK(back.potential.params.phi == c.potential.params.phi);
}

TEST_CASE("unknown keys and bad values are rejected with the key named") {
    CHECK(error_of("[train]\nbogus = 1\n").find("unknown config key 'train.bogus'") != std::string::npos);
    CHECK(error_of("[nope]\nseed = 1\n").find("'nope.seed'") != std::string::npos);
    CHECK(error_of("seed = 1\n").find("unknown config key 'seed'") != std::string::npos);
    CHECK(error_of("[run]\nseed = -1\n").find("'run.seed'") != std::string::npos);
    CHECK(error_of("[run]\nthreads = 0\n").find("'run.threads'") != std::string::npos);
    CHECK(error_of("[data]\nk = 12x\n").find("'data.k'") != std::string::npos);
    CHECK(error_of("[train]\ntask = sorting\n").find("'train.task'") != std::string::npos);
    CHECK(error_of("[train]\nlearning_rate = fast\n").find("'train.learning_rate'") != std::string::npos);
    CHECK(error_of("[transfer]\nscratch = maybe\n").find("'transfer.scratch'") != std::string::npos);
    CHECK(error_of("[run\n").find("malformed section") != std::string::npos);
    CHECK(error_of("[run]\nseed\n").find("expected 'key = value'") != std::string::npos);
    CHECK(error_of("[run]\n\nbogus = 2\n").find("config:3:") == 0);

    config::RunConfig c;
    CHECK_THROWS_AS(config::set_value(c, "model.depth", "3"), ConfigError);
    CHECK_THROWS_AS(config::get_value(c, "model.depth"), ConfigError);
    config::set_value(c, "model.width", " 16 ");
    CHECK(config::get_value(c, "model.width") == "16");
}

TEST_CASE("config files load and resolved files are written") {
    const auto dir = std::filesystem::temp_directory_path() / ("galattice_config_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "run.cfg") << "[model]\nblocks = 2\n";
    const auto c = config::load_config(dir / "run.cfg");
    CHECK(c.net.blocks == 2);
    config::write_resolved(c, dir / "sub" / "resolved.cfg");
    const auto back = config::load_config(dir / "sub" / "resolved.cfg");
    CHECK(config::to_text(back) == config::to_text(c));
    CHECK_THROWS_AS(config::load_config(dir / "missing.cfg"), ConfigError);
    std::filesystem::remove_all(dir);
}
