#include "galattice/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace galattice {

namespace {

constexpr char kMagic[] = "GALA1";

void write_le(std::ostream& os, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    os.write(buf, 8);
}

double read_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw CheckpointError("checkpoint manifest: malformed value '" + value + "' for '" + key + "'");
    }
}

}  // namespace

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
    os << kMagic << '\n';
    os << "version " << model.version << '\n';
    os << "task " << task_id(model.task) << '\n';
    os << "classes " << model.head.n_classes << '\n';
    os << "latent " << model.head.latent << '\n';
    os << "tokens " << model.head.decoder_tokens << '\n';
    os << "width " << model.net.width << '\n';
    os << "hidden " << model.net.hidden << '\n';
    os << "blocks " << model.net.blocks << '\n';
    os << "types " << model.net.n_types << '\n';
    os << "params " << model.params.size() << '\n';
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const Shape& s = model.params.value(i).shape();
        os << model.params.name(i) << ' ' << s.size();
        for (std::size_t d : s) os << ' ' << d;
        os << '\n';
    }
    os << "end\n";
    for (std::size_t i = 0; i < model.params.size(); ++i)
        for (double v : model.params.value(i).storage()) write_le(os, v);
    if (!os) throw CheckpointError("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != kMagic) throw CheckpointError("bad checkpoint magic in " + path.string());

    ModelParams model;
    std::vector<std::pair<std::string, Shape>> layout;
    bool have_version = false, have_task = false;
    std::size_t declared = 0;
    bool ended = false;
    while (std::getline(is, line)) {
        if (line == "end") {
            ended = true;
            break;
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (!layout.empty() || (key != "version" && key != "task" && key != "classes" && key != "latent" &&
                                key != "tokens" && key != "width" && key != "hidden" && key != "blocks" &&
                                key != "types" && key != "params")) {
            // parameter line: name rank extents...
            if (layout.size() >= declared)
                throw CheckpointError("checkpoint manifest: unexpected entry '" + line + "'");
            std::size_t rank = 0;
            if (!(ls >> rank)) throw CheckpointError("checkpoint manifest: malformed parameter line '" + line + "'");
            Shape s(rank);
            for (auto& d : s)
                if (!(ls >> d)) throw CheckpointError("checkpoint manifest: malformed parameter line '" + line + "'");
            layout.emplace_back(key, std::move(s));
            continue;
        }
        std::string value;
        ls >> value;
        if (key == "version") {
            const std::size_t v = parse_count(key, value);
            if (v != kCheckpointVersion)
                throw CheckpointError("unknown checkpoint version " + value + " (supported: " +
                                      std::to_string(kCheckpointVersion) + ")");
            model.version = static_cast<std::uint32_t>(v);
            have_version = true;
        } else if (key == "task") {
            try {
                model.task = parse_task(value);
            } catch (const std::invalid_argument&) {
                throw CheckpointError("checkpoint manifest names unknown task id '" + value + "'");
            }
            have_task = true;
        } else if (key == "classes") {
            model.head.n_classes = parse_count(key, value);
        } else if (key == "latent") {
            model.head.latent = parse_count(key, value);
        } else if (key == "tokens") {
            model.head.decoder_tokens = parse_count(key, value);
        } else if (key == "width") {
            model.net.width = parse_count(key, value);
        } else if (key == "hidden") {
            model.net.hidden = parse_count(key, value);
        } else if (key == "blocks") {
            model.net.blocks = parse_count(key, value);
        } else if (key == "types") {
            model.net.n_types = parse_count(key, value);
        } else if (key == "params") {
            declared = parse_count(key, value);
        }
    }
    if (!ended) throw CheckpointError("checkpoint manifest is not terminated");
    if (!have_version) throw CheckpointError("checkpoint manifest lacks a version");
    if (!have_task) throw CheckpointError("checkpoint manifest lacks a task id");
    if (layout.size() != declared)
        throw CheckpointError("checkpoint manifest declares " + std::to_string(declared) + " parameters but lists " +
                              std::to_string(layout.size()));

    std::size_t expected = 0;
    for (const auto& [name, s] : layout) expected += shape_size(s);
    std::vector<unsigned char> payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (payload.size() != expected * 8)
        throw CheckpointError("checkpoint payload length mismatch: manifest needs " + std::to_string(expected * 8) +
                              " bytes, file has " + std::to_string(payload.size()));
    std::size_t offset = 0;
    for (auto& [name, s] : layout) {
        Tensor t(s);
        for (double& v : t.storage()) {
            v = read_le(payload.data() + offset);
            offset += 8;
        }
        model.params.add(name, std::move(t));
    }
    return model;
}

}  // namespace galattice
