#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace galattice::potentials {

enum class Kind { OPP, LJG };

struct PotentialParams {
    Kind kind = Kind::OPP;
    double k = 5.0;       // OPP wavenumber
    double phi = 2.8;     // OPP phase, radians
    double r0 = 1.1;      // LJG Gaussian center
    double epsilon = 3.0; // LJG well depth
    double sigma = 0.02;  // LJG Gaussian width
    double cutoff = 0.0;  // 0 selects the default for the kind
};

/// Table presets by structure name, e.g. "cF4-Cu", "icosahedral", "cI2-W".
PotentialParams preset(std::string_view name);
std::vector<std::string> preset_names();

/// Default cutoff: OPP at its third extremum beyond r = 1, LJG at 2.5.
double default_cutoff(const PotentialParams& p);
double effective_cutoff(const PotentialParams& p);

/// U(r) = r^-15 + cos(k (r - 1) + phi) / r^3, zero beyond the cutoff.
double u_opp(double r, const PotentialParams& p);
/// U(r) = 1/12 - 2 / r^6 - epsilon exp(-(r - r0)^2 / (2 sigma^2)), zero beyond the cutoff.
double u_ljg(double r, const PotentialParams& p);
double u(double r, const PotentialParams& p);

double du_opp(double r, const PotentialParams& p);
double du_ljg(double r, const PotentialParams& p);
double du(double r, const PotentialParams& p);

/// Writes "r,u,du" rows for r in [r_min, r_max] with `points` samples.
void write_table_csv(const PotentialParams& p, double r_min, double r_max, std::size_t points,
                     const std::filesystem::path& path);

}  // namespace galattice::potentials
