#include "galattice/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "galattice/neighbors.hpp"
#include "galattice/parallel.hpp"
#include "galattice/random.hpp"
#include "galattice/structure_io.hpp"

namespace galattice::data {

namespace {

constexpr char kPayloadMagic[8] = {'G', 'A', 'L', 'A', 'D', 'A', 'T', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    os.write(buf, 8);
}

std::uint64_t read_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::vector<std::size_t> indices_where(const std::vector<CloudRecord>& records, bool validation) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].validation == validation) out.push_back(i);
    return out;
}

template <class T>
T parse_field(const std::string& text, const std::string& what, std::size_t line) {
    std::istringstream is(text);
    T v{};
    if (!(is >> v) || !is.eof())
        throw DatasetError("dataset manifest line " + std::to_string(line) + ": malformed " + what + " '" + text + "'");
    return v;
}

}  // namespace

std::vector<std::size_t> CloudDataset::train_indices() const { return indices_where(records, false); }
std::vector<std::size_t> CloudDataset::validation_indices() const { return indices_where(records, true); }

std::vector<bool> split_assignment(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("validation fraction must lie in [0, 1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed({seed, hash_string("split")}));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    std::vector<bool> val(n, false);
    for (std::size_t i = 0; i < n_val; ++i) val[order[i]] = true;
    return val;
}

CloudDataset dataset_from_configurations(const std::vector<LabeledConfiguration>& sources,
                                         const std::vector<std::size_t>& clouds_per_source,
                                         std::vector<std::string> class_names, std::size_t k, double validation_fraction,
                                         std::uint64_t seed, std::size_t threads) {
    if (sources.size() != clouds_per_source.size())
        throw std::invalid_argument("one cloud count per source configuration is required");
    CloudDataset data;
    data.seed = seed;
    data.k = k;
    data.validation_fraction = validation_fraction;
    data.class_names = std::move(class_names);

    struct Job {
        std::size_t source;
        std::size_t particle;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < sources.size(); ++s) {
        const LabeledConfiguration& src = sources[s];
        if (src.label >= data.class_names.size())
            throw std::invalid_argument("source '" + src.source + "' has class " + std::to_string(src.label) +
                                        " but only " + std::to_string(data.class_names.size()) + " classes exist");
        const std::size_t n = src.config.size();
        if (clouds_per_source[s] > n)
            throw std::invalid_argument("source '" + src.source + "' has " + std::to_string(n) + " particles, " +
                                        std::to_string(clouds_per_source[s]) + " clouds requested");
        if (k >= n) throw std::invalid_argument("source '" + src.source + "' is too small for k = " + std::to_string(k));
        std::vector<std::size_t> particles(n);
        std::iota(particles.begin(), particles.end(), 0);
        std::mt19937_64 rng(mix_seed({derive_seed(seed, src.source, src.noise, src.replica), hash_string("particles")}));
        std::shuffle(particles.begin(), particles.end(), rng);
        particles.resize(clouds_per_source[s]);
        std::sort(particles.begin(), particles.end());
        for (std::size_t p : particles) jobs.push_back({s, p});
    }

    std::vector<std::unique_ptr<structure::NeighborFinder>> finders(sources.size());
    for (std::size_t s = 0; s < sources.size(); ++s)
        if (clouds_per_source[s] > 0) finders[s] = std::make_unique<structure::NeighborFinder>(sources[s].config, k);

    data.clouds.resize(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i, std::size_t) {
        data.clouds[i] = finders[jobs[i].source]->cloud(jobs[i].particle);
    });

    const std::vector<bool> val = split_assignment(jobs.size(), validation_fraction, seed);
    data.records.resize(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const LabeledConfiguration& src = sources[jobs[i].source];
        CloudRecord& r = data.records[i];
        r.source = src.source;
        r.noise = src.noise;
        r.replica = src.replica;
        r.particle = jobs[i].particle;
        r.label = src.label;
        r.validation = val[i];
        r.seed = mix_seed({derive_seed(seed, src.source, src.noise, src.replica), r.particle});
    }
    return data;
}

CloudDataset generate_dataset(const DatasetSpec& spec, std::size_t threads) {
    if (spec.noise_levels.empty()) throw std::invalid_argument("at least one noise level is required");
    if (spec.replicas == 0) throw std::invalid_argument("replica count must be at least 1");
    std::vector<structure::UnitCell> cells;
    for (const std::string& name : spec.prototypes) cells.push_back(structure::build_prototype(name));
    for (const auto& path : spec.structure_files) cells.push_back(structure::load_structure(path));
    if (cells.empty()) throw std::invalid_argument("no prototypes selected");

    std::vector<std::string> names;
    for (const auto& c : cells) {
        if (std::find(names.begin(), names.end(), c.name) != names.end())
            throw std::invalid_argument("prototype '" + c.name + "' listed twice");
        names.push_back(c.name);
    }

    const std::size_t slots = spec.noise_levels.size() * spec.replicas;
    std::vector<LabeledConfiguration> sources;
    std::vector<std::size_t> counts;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const structure::Configuration base = structure::replicate(cells[c], spec.min_particles);
        std::size_t slot = 0;
        for (double noise : spec.noise_levels)
            for (std::size_t r = 0; r < spec.replicas; ++r, ++slot) {
                LabeledConfiguration lc;
                lc.source = cells[c].name;
                lc.noise = noise;
                lc.replica = r;
                lc.label = c;
                lc.config = structure::add_thermal_noise(base, noise, derive_seed(spec.seed, cells[c].name, noise, r));
                std::ostringstream prov;
                prov << std::setprecision(17) << cells[c].name << " noise=" << noise << " replica=" << r;
                lc.config.provenance = prov.str();
                sources.push_back(std::move(lc));
                counts.push_back(spec.clouds_per_class / slots + (slot < spec.clouds_per_class % slots ? 1 : 0));
            }
    }
    return dataset_from_configurations(sources, counts, names, spec.k, spec.validation_fraction, spec.seed, threads);
}

std::filesystem::path save_dataset(const CloudDataset& data, const std::filesystem::path& stem) {
    std::filesystem::path manifest = stem, payload = stem;
    manifest += ".manifest";
    payload += ".bin";
    if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
    {
        std::ofstream os(manifest, std::ios::trunc);
        if (!os) throw DatasetError("cannot write dataset manifest " + manifest.string());
        os << std::setprecision(17);
        os << "galattice-dataset 1\n";
        os << "seed " << data.seed << '\n';
        os << "k " << data.k << '\n';
        os << "validation_fraction " << data.validation_fraction << '\n';
        os << "payload " << payload.filename().string() << '\n';
        os << "classes " << data.class_names.size() << '\n';
        for (std::size_t c = 0; c < data.class_names.size(); ++c) os << "class " << c << ' ' << data.class_names[c] << '\n';
        os << "records " << data.records.size() << '\n';
        for (std::size_t i = 0; i < data.records.size(); ++i) {
            const CloudRecord& r = data.records[i];
            os << "record " << i << ' ' << r.source << ' ' << r.noise << ' ' << r.replica << ' ' << r.particle << ' '
               << r.label << ' ' << (r.validation ? "val" : "train") << ' ' << r.seed << '\n';
        }
        os << "end\n";
        if (!os) throw DatasetError("failed writing " + manifest.string());
    }
    std::ofstream os(payload, std::ios::binary | std::ios::trunc);
    if (!os) throw DatasetError("cannot write dataset payload " + payload.string());
    os.write(kPayloadMagic, 8);
    write_u64(os, 3);
    write_u64(os, data.clouds.size());
    write_u64(os, data.k);
    write_u64(os, 4);
    for (const PointCloud& c : data.clouds) {
        if (c.size() != data.k) throw DatasetError("cloud size differs from the dataset k");
        for (std::size_t b = 0; b < c.size(); ++b) {
            for (int d = 0; d < 3; ++d) write_u64(os, std::bit_cast<std::uint64_t>(c.bonds[b][d]));
            write_u64(os, std::bit_cast<std::uint64_t>(static_cast<double>(c.types[b])));
        }
    }
    if (!os) throw DatasetError("failed writing " + payload.string());
    return manifest;
}

CloudDataset load_dataset(const std::filesystem::path& manifest) {
    std::ifstream is(manifest);
    if (!is) throw DatasetError("cannot open dataset manifest " + manifest.string());
    CloudDataset data;
    std::string line, payload_name;
    std::size_t lineno = 0, declared_records = 0, declared_classes = 0;
    bool ended = false;
    if (!std::getline(is, line) || line != "galattice-dataset 1")
        throw DatasetError("not a dataset manifest: " + manifest.string());
    ++lineno;
    while (std::getline(is, line)) {
        ++lineno;
        if (line == "end") {
            ended = true;
            break;
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        std::vector<std::string> f;
        for (std::string w; ls >> w;) f.push_back(w);
        auto need = [&](std::size_t n) {
            if (f.size() != n)
                throw DatasetError("dataset manifest line " + std::to_string(lineno) + ": expected " +
                                   std::to_string(n) + " fields after '" + key + "'");
        };
        if (key == "seed") {
            need(1);
            data.seed = parse_field<std::uint64_t>(f[0], "seed", lineno);
        } else if (key == "k") {
            need(1);
            data.k = parse_field<std::size_t>(f[0], "k", lineno);
        } else if (key == "validation_fraction") {
            need(1);
            data.validation_fraction = parse_field<double>(f[0], "validation fraction", lineno);
        } else if (key == "payload") {
            need(1);
            payload_name = f[0];
        } else if (key == "classes") {
            need(1);
            declared_classes = parse_field<std::size_t>(f[0], "class count", lineno);
        } else if (key == "class") {
            need(2);
            if (parse_field<std::size_t>(f[0], "class index", lineno) != data.class_names.size())
                throw DatasetError("dataset manifest line " + std::to_string(lineno) + ": classes out of order");
            data.class_names.push_back(f[1]);
        } else if (key == "records") {
            need(1);
            declared_records = parse_field<std::size_t>(f[0], "record count", lineno);
        } else if (key == "record") {
            need(8);
            if (parse_field<std::size_t>(f[0], "record index", lineno) != data.records.size())
                throw DatasetError("dataset manifest line " + std::to_string(lineno) + ": records out of order");
            CloudRecord r;
            r.source = f[1];
            r.noise = parse_field<double>(f[2], "noise", lineno);
            r.replica = parse_field<std::size_t>(f[3], "replica", lineno);
            r.particle = parse_field<std::size_t>(f[4], "particle", lineno);
            r.label = parse_field<std::size_t>(f[5], "class", lineno);
            if (f[6] != "train" && f[6] != "val")
                throw DatasetError("dataset manifest line " + std::to_string(lineno) + ": split must be train or val");
            r.validation = f[6] == "val";
            r.seed = parse_field<std::uint64_t>(f[7], "seed", lineno);
            data.records.push_back(std::move(r));
        } else {
            throw DatasetError("dataset manifest line " + std::to_string(lineno) + ": unknown field '" + key + "'");
        }
    }
    if (!ended) throw DatasetError("dataset manifest is not terminated");
    if (data.class_names.size() != declared_classes || data.records.size() != declared_records)
        throw DatasetError("dataset manifest counts do not match its entries");
    for (const CloudRecord& r : data.records)
        if (r.label >= data.class_names.size()) throw DatasetError("dataset record names an undeclared class");
    if (payload_name.empty()) throw DatasetError("dataset manifest names no payload");

    const std::filesystem::path payload = manifest.parent_path() / payload_name;
    std::ifstream ps(payload, std::ios::binary);
    if (!ps) throw DatasetError("cannot open dataset payload " + payload.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(ps)), std::istreambuf_iterator<char>());
    const std::size_t header = 8 + 8 * 4;
    if (bytes.size() < header || !std::equal(kPayloadMagic, kPayloadMagic + 8, bytes.begin()))
        throw DatasetError("bad dataset payload header in " + payload.string());
    if (read_u64(bytes.data() + 8) != 3 || read_u64(bytes.data() + 16) != data.records.size() ||
        read_u64(bytes.data() + 24) != data.k || read_u64(bytes.data() + 32) != 4)
        throw DatasetError("dataset payload shape does not match the manifest");
    if (bytes.size() != header + data.records.size() * data.k * 4 * 8)
        throw DatasetError("dataset payload length mismatch in " + payload.string());
    const unsigned char* p = bytes.data() + header;
    data.clouds.resize(data.records.size());
    for (PointCloud& c : data.clouds) {
        c.bonds.resize(data.k);
        c.types.resize(data.k);
        for (std::size_t b = 0; b < data.k; ++b) {
            for (int d = 0; d < 3; ++d, p += 8) c.bonds[b][d] = std::bit_cast<double>(read_u64(p));
            c.types[b] = static_cast<int>(std::bit_cast<double>(read_u64(p)));
            p += 8;
        }
    }
    return data;
}

}  // namespace galattice::data
