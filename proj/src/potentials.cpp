#include "galattice/potentials.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace galattice::potentials {

namespace {

void check_r(double r) {
    if (!(r > 0.0)) throw std::invalid_argument("pair distance must be positive, got " + std::to_string(r));
}

void check_params(const PotentialParams& p) {
    if (p.kind == Kind::LJG && !(p.sigma > 0.0)) throw std::invalid_argument("LJG sigma must be positive");
    if (p.cutoff < 0.0) throw std::invalid_argument("cutoff must be positive");
}

double raw_opp(double r, const PotentialParams& p) {
    return std::pow(r, -15.0) + std::cos(p.k * (r - 1.0) + p.phi) / (r * r * r);
}

double raw_dopp(double r, const PotentialParams& p) {
    const double a = p.k * (r - 1.0) + p.phi;
    return -15.0 * std::pow(r, -16.0) - p.k * std::sin(a) / (r * r * r) - 3.0 * std::cos(a) / std::pow(r, 4.0);
}

struct Preset {
    const char* name;
    PotentialParams params;
};

const std::vector<Preset>& presets() {
    static const std::vector<Preset> table = {
        {"cF4-Cu", {Kind::OPP, 5.0, 2.8}},
        {"tP30-CrFe", {Kind::OPP, 8.5, 1.5}},
        {"cP54-K4Si23", {Kind::OPP, 8.5, 4.0}},
        {"icosahedral", {Kind::OPP, 7.5, 3.9}},
        {"cI2-W", {Kind::LJG, 0.0, 0.0, 1.1, 3.0}},
        {"hP2-Mg", {Kind::LJG, 0.0, 0.0, 1.8, 0.1}},
    };
    return table;
}

}  // namespace

PotentialParams preset(std::string_view name) {
    for (const Preset& p : presets())
        if (name == p.name) return p.params;
    throw std::invalid_argument("unknown potential preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const Preset& p : presets()) out.emplace_back(p.name);
    return out;
}

double default_cutoff(const PotentialParams& p) {
    if (p.kind == Kind::LJG) return 2.5;
    // scan the derivative for sign changes beyond r = 1, refine by bisection
    const double step = 1e-3;
    int found = 0;
    double r = 1.0, d = raw_dopp(r, p);
    while (r < 50.0) {
        const double r2 = r + step, d2 = raw_dopp(r2, p);
        if ((d < 0.0) != (d2 < 0.0)) {
            if (++found == 3) {
                double lo = r, hi = r2;
                for (int i = 0; i < 100; ++i) {
                    const double mid = 0.5 * (lo + hi);
                    if ((raw_dopp(mid, p) < 0.0) == (d < 0.0))
                        lo = mid;
                    else
                        hi = mid;
                }
                return 0.5 * (lo + hi);
            }
        }
        r = r2;
        d = d2;
    }
    throw std::invalid_argument("OPP potential has fewer than three extrema beyond r = 1");
}

double effective_cutoff(const PotentialParams& p) {
    check_params(p);
    return p.cutoff > 0.0 ? p.cutoff : default_cutoff(p);
}

double u_opp(double r, const PotentialParams& p) {
    check_r(r);
    if (r > effective_cutoff(p)) return 0.0;
    return raw_opp(r, p);
}

double u_ljg(double r, const PotentialParams& p) {
    check_r(r);
    if (r > effective_cutoff(p)) return 0.0;
    const double x = r - p.r0;
    return 1.0 / 12.0 - 2.0 / std::pow(r, 6.0) - p.epsilon * std::exp(-x * x / (2.0 * p.sigma * p.sigma));
}

double du_opp(double r, const PotentialParams& p) {
    check_r(r);
    if (r > effective_cutoff(p)) return 0.0;
    return raw_dopp(r, p);
}

double du_ljg(double r, const PotentialParams& p) {
    check_r(r);
    if (r > effective_cutoff(p)) return 0.0;
    const double x = r - p.r0, s2 = p.sigma * p.sigma;
    return 12.0 / std::pow(r, 7.0) + p.epsilon * x / s2 * std::exp(-x * x / (2.0 * s2));
}

double u(double r, const PotentialParams& p) { return p.kind == Kind::OPP ? u_opp(r, p) : u_ljg(r, p); }
double du(double r, const PotentialParams& p) { return p.kind == Kind::OPP ? du_opp(r, p) : du_ljg(r, p); }

void write_table_csv(const PotentialParams& p, double r_min, double r_max, std::size_t points,
                     const std::filesystem::path& path) {
    if (!(r_min > 0.0) || !(r_max > r_min) || points < 2)
        throw std::invalid_argument("potential table needs 0 < r_min < r_max and at least 2 points");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << std::setprecision(17) << "r,u,du\n";
    for (std::size_t i = 0; i < points; ++i) {
        const double r = r_min + (r_max - r_min) * static_cast<double>(i) / static_cast<double>(points - 1);
        os << r << ',' << u(r, p) << ',' << du(r, p) << '\n';
    }
}

}  // namespace galattice::potentials
