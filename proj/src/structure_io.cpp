#include "galattice/structure_io.hpp"

#include <Eigen/LU>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace galattice::structure {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

double parse_double(const std::string& token, const std::string& ctx) {
    double v = 0.0;
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v))
        throw FormatError(ctx + ": malformed number '" + token + "'");
    return v;
}

long parse_int(const std::string& token, const std::string& ctx) {
    long v = 0;
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc() || ptr != end) throw FormatError(ctx + ": malformed integer '" + token + "'");
    return v;
}

std::vector<std::string> split(const std::string& line, char sep = ' ') {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        const bool is_sep = sep == ' ' ? (c == ' ' || c == '\t' || c == '\r') : c == sep;
        if (is_sep) {
            if (!cur.empty() || sep != ' ') out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty() || (sep != ' ' && !out.empty())) out.push_back(cur);
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << std::setprecision(17);
    return os;
}

}  // namespace

UnitCell load_structure(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open structure file " + path.string());
    UnitCell cell;
    bool have_name = false, have_lattice = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        auto tok = split(line);
        if (tok.empty()) continue;
        const std::string ctx = where(path, lineno);
        const std::string& key = tok[0];
        if (key == "name") {
            if (tok.size() != 2) throw FormatError(ctx + ": 'name' takes one value");
            cell.name = tok[1];
            have_name = true;
        } else if (key == "lattice") {
            if (tok.size() != 10) throw FormatError(ctx + ": 'lattice' takes 9 numbers");
            for (int i = 0; i < 9; ++i) cell.lattice(i / 3, i % 3) = parse_double(tok[static_cast<std::size_t>(i + 1)], ctx);
            have_lattice = true;
        } else if (key == "basis") {
            if (tok.size() != 4) throw FormatError(ctx + ": 'basis' takes 3 numbers");
            cell.basis.emplace_back(parse_double(tok[1], ctx), parse_double(tok[2], ctx), parse_double(tok[3], ctx));
        } else if (key == "species") {
            for (std::size_t i = 1; i < tok.size(); ++i) cell.species.push_back(static_cast<int>(parse_int(tok[i], ctx)));
        } else {
            throw FormatError(ctx + ": unknown field '" + key + "'");
        }
    }
    if (!have_name) throw FormatError(path.string() + ": missing field 'name'");
    if (!have_lattice) throw FormatError(path.string() + ": missing field 'lattice'");
    if (cell.species.empty()) cell.species.assign(cell.basis.size(), 0);
    validate(cell);
    return cell;
}

void save_structure(const UnitCell& cell, const std::filesystem::path& path) {
    validate(cell);
    auto os = open_out(path);
    os << "name " << cell.name << '\n' << "lattice";
    for (int i = 0; i < 9; ++i) os << ' ' << cell.lattice(i / 3, i % 3);
    os << '\n';
    for (const Vec3& b : cell.basis) os << "basis " << b[0] << ' ' << b[1] << ' ' << b[2] << '\n';
    os << "species";
    for (int s : cell.species) os << ' ' << s;
    os << '\n';
}

std::vector<TrajectoryFrame> load_trajectory(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open trajectory file " + path.string());
    std::vector<TrajectoryFrame> frames;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto count_tok = split(line);
        if (count_tok.empty()) continue;
        std::string ctx = where(path, lineno);
        if (count_tok.size() != 1) throw FormatError(ctx + ": expected an atom count");
        const long n = parse_int(count_tok[0], ctx);
        if (n <= 0) throw FormatError(ctx + ": atom count must be positive");

        TrajectoryFrame frame;
        frame.index = frames.size();
        frame.config.provenance = path.filename().string() + "#" + std::to_string(frame.index);
        if (!std::getline(is, line)) throw FormatError(ctx + ": missing comment line");
        ++lineno;
        ctx = where(path, lineno);
        bool have_box = false;
        for (const std::string& field : split(line)) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) throw FormatError(ctx + ": malformed comment field '" + field + "'");
            const std::string key = field.substr(0, eq);
            const std::string value = field.substr(eq + 1);
            if (key == "box") {
                auto nums = split(value, ',');
                if (nums.size() != 9) throw FormatError(ctx + ": 'box' takes 9 comma-separated numbers");
                for (int i = 0; i < 9; ++i)
                    frame.config.box(i / 3, i % 3) = parse_double(nums[static_cast<std::size_t>(i)], ctx);
                have_box = true;
            } else if (key == "tag") {
                frame.tag = parse_double(value, ctx);
            } else {
                throw FormatError(ctx + ": unknown field '" + key + "'");
            }
        }
        if (!have_box) throw FormatError(ctx + ": missing field 'box'");
        if (std::abs(frame.config.box.determinant()) <= 1e-9) throw FormatError(ctx + ": singular box");
        const Mat3 inv = frame.config.box.inverse();
        for (long a = 0; a < n; ++a) {
            if (!std::getline(is, line)) throw FormatError(where(path, lineno) + ": truncated frame");
            ++lineno;
            ctx = where(path, lineno);
            auto tok = split(line);
            if (tok.size() != 4) throw FormatError(ctx + ": expected 'species x y z'");
            const long s = parse_int(tok[0], ctx);
            if (s < 0) throw FormatError(ctx + ": negative species index");
            const Vec3 p(parse_double(tok[1], ctx), parse_double(tok[2], ctx), parse_double(tok[3], ctx));
            frame.config.positions.push_back(wrap_position(frame.config.box, inv, p));
            frame.config.species.push_back(static_cast<int>(s));
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

void save_trajectory(const std::vector<TrajectoryFrame>& frames, const std::filesystem::path& path) {
    auto os = open_out(path);
    for (const TrajectoryFrame& f : frames) {
        const Configuration& c = f.config;
        os << c.size() << '\n' << "box=";
        for (int i = 0; i < 9; ++i) os << (i ? "," : "") << c.box(i / 3, i % 3);
        if (f.tag) os << " tag=" << *f.tag;
        os << '\n';
        for (std::size_t i = 0; i < c.size(); ++i) {
            const Vec3& p = c.positions[i];
            os << (c.species.empty() ? 0 : c.species[i]) << ' ' << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
        }
    }
}

}  // namespace galattice::structure
