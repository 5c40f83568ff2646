#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "galattice/checkpoint.hpp"
#include "galattice/core.hpp"
#include "helpers.hpp"

using namespace galattice;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    return fs::temp_directory_path() / ("galattice_ckpt_" + std::to_string(::getpid()) + "_" + name);
}

ModelParams sample_model() {
    ModelParams m;
    m.task = TaskKind::NoisyBond;
    m.net.width = 8;
    m.net.hidden = 6;
    m.net.blocks = 1;
    std::mt19937_64 rng(1);
    net::init_core(m.params, m.net, rng);
    m.params.add("head.extra", testing::random_tensor({3, 2}, rng));
    m.params.value("head.extra")[0] = -0.0;
    m.params.value("head.extra")[1] = 1e-310;
    return m;
}

std::string read_all(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os << s;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
    const ModelParams m = sample_model();
    const fs::path p = temp_path("roundtrip");
    save_checkpoint(m, p);
    const std::string raw = read_all(p);
    CHECK(raw.rfind("GALA1\n", 0) == 0);
    const ModelParams back = load_checkpoint(p);
    CHECK(back.task == m.task);
    CHECK(back.net.width == 8);
    CHECK(back.net.blocks == 1);
    REQUIRE(back.params.size() == m.params.size());
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        CHECK(back.params.name(i) == m.params.name(i));
        CHECK(back.params.value(i).shape() == m.params.value(i).shape());
    }
    CHECK(back.params.bytes() == m.params.bytes());
    fs::remove(p);
}

TEST_CASE("checkpoint errors") {
    const ModelParams m = sample_model();
    const fs::path p = temp_path("errors");
    save_checkpoint(m, p);
    const std::string raw = read_all(p);

    write_all(p, raw.substr(0, raw.size() - 5));
    CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("length mismatch"), CheckpointError);

    std::string bad = raw;
    bad[0] = 'X';
    write_all(p, bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("magic"), CheckpointError);

    std::string task = raw;
    task.replace(task.find("task noisy"), 10, "task zebra");
    write_all(p, task);
    CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("zebra"), CheckpointError);

    std::string version = raw;
    version.replace(version.find("version 1"), 9, "version 7");
    write_all(p, version);
    CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("version"), CheckpointError);
    fs::remove(p);
}
