#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "galattice/dataset.hpp"
#include "galattice/neighbors.hpp"
#include "galattice/random.hpp"

using namespace galattice;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("galattice_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

data::DatasetSpec small_spec() {
    data::DatasetSpec s;
    s.prototypes = {"cI2-W", "cF4-Cu"};
    s.noise_levels = {1e-2, 3e-2};
    s.replicas = 2;
    s.clouds_per_class = 30;
    s.k = 8;
    s.min_particles = 256;
    s.seed = 11;
    return s;
}

}  // namespace

TEST_CASE("generated datasets have the requested classes, counts and split") {
    const data::CloudDataset d = data::generate_dataset(small_spec());
    CHECK(d.size() == 60);
    CHECK(d.n_classes() == 2);
    CHECK(d.class_names[0] == "cI2-W");
    std::size_t per_class[2] = {0, 0};
    std::set<std::tuple<std::string, double, std::size_t, std::size_t>> seen;
    for (std::size_t i = 0; i < d.size(); ++i) {
        ++per_class[d.records[i].label];
        CHECK(d.clouds[i].size() == 8);
        CHECK(seen.insert({d.records[i].source, d.records[i].noise, d.records[i].replica, d.records[i].particle}).second);
    }
    CHECK(per_class[0] == 30);
    CHECK(per_class[1] == 30);
    const auto tr = d.train_indices(), va = d.validation_indices();
    CHECK(va.size() == 18);
    CHECK(tr.size() == 42);
    std::set<std::size_t> all(tr.begin(), tr.end());
    for (std::size_t v : va) CHECK(all.insert(v).second);
}

TEST_CASE("dataset clouds equal brute-force neighbors of the recorded particle") {
    const data::DatasetSpec spec = small_spec();
    const data::CloudDataset d = data::generate_dataset(spec);
    for (std::size_t i : {0ul, 17ul, 44ul}) {
        const data::CloudRecord& r = d.records[i];
        const structure::Configuration base = structure::replicate(structure::build_prototype(r.source), spec.min_particles);
        const structure::Configuration c =
            structure::add_thermal_noise(base, r.noise, derive_seed(spec.seed, r.source, r.noise, r.replica));
        const PointCloud ref = structure::knn_cloud(c, r.particle, spec.k);
        for (std::size_t b = 0; b < spec.k; ++b) CHECK((ref.bonds[b] - d.clouds[i].bonds[b]).norm() == 0.0);
    }
}

TEST_CASE("split assignment is reproducible and sized by rounding") {
    const auto a = data::split_assignment(10, 0.3, 5), b = data::split_assignment(10, 0.3, 5);
    CHECK(a == b);
    CHECK(std::count(a.begin(), a.end(), true) == 3);
    CHECK(data::split_assignment(10, 0.3, 6) != a);
    CHECK_THROWS_AS(data::split_assignment(10, 1.0, 5), std::invalid_argument);
}

TEST_CASE("datasets round trip through manifest and payload bit-exactly") {
    const auto dir = temp_dir("dataset");
    const data::CloudDataset d = data::generate_dataset(small_spec());
    const auto m1 = data::save_dataset(d, dir / "a" / "d");
    const auto m2 = data::save_dataset(data::generate_dataset(small_spec()), dir / "b" / "d");
    CHECK(slurp(m1) == slurp(m2));
    CHECK(slurp(dir / "a" / "d.bin") == slurp(dir / "b" / "d.bin"));
    const data::CloudDataset e = data::load_dataset(m1);
    REQUIRE(e.size() == d.size());
    CHECK(e.class_names == d.class_names);
    CHECK(e.k == d.k);
    CHECK(e.seed == d.seed);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(e.records[i].source == d.records[i].source);
        CHECK(e.records[i].noise == d.records[i].noise);
        CHECK(e.records[i].particle == d.records[i].particle);
        CHECK(e.records[i].validation == d.records[i].validation);
        CHECK(e.records[i].seed == d.records[i].seed);
        CHECK(e.clouds[i].types == d.clouds[i].types);
        for (std::size_t b = 0; b < d.k; ++b) CHECK((e.clouds[i].bonds[b] - d.clouds[i].bonds[b]).norm() == 0.0);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed dataset files are rejected with named errors") {
    const auto dir = temp_dir("dataset_bad");
    const auto m = data::save_dataset(data::generate_dataset(small_spec()), dir / "d");
    const std::string text = slurp(m);
    auto expect = [&](const std::string& content, const std::string& needle) {
        std::ofstream(dir / "x.manifest", std::ios::trunc) << content;
        try {
            data::load_dataset(dir / "x.manifest");
            FAIL("expected a DatasetError");
        } catch (const data::DatasetError& e) {
            CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
        }
    };
    std::string unknown = text;
    unknown.insert(unknown.find("k 8"), "colour blue\n");
    expect(unknown, "unknown field 'colour'");
    std::string bad_seed = text;
    bad_seed.replace(bad_seed.find("seed 11"), 7, "seed x1");
    expect(bad_seed, "malformed seed");
    expect(text.substr(0, text.size() - 4), "not terminated");

    std::filesystem::copy_file(m, dir / "y.manifest");
    std::string payload = slurp(dir / "d.bin");
    std::ofstream(dir / "d.bin", std::ios::binary | std::ios::trunc) << payload.substr(0, payload.size() - 8);
    CHECK_THROWS_AS(data::load_dataset(dir / "y.manifest"), data::DatasetError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("requesting more clouds than particles fails") {
    data::DatasetSpec s = small_spec();
    s.clouds_per_class = 100000;
    CHECK_THROWS_AS(data::generate_dataset(s), std::invalid_argument);
    s = small_spec();
    s.prototypes = {"cI2-W", "cI2-W"};
    CHECK_THROWS_AS(data::generate_dataset(s), std::invalid_argument);
}
