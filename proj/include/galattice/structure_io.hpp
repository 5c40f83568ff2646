#pragma once

// Structure file: one record, "key values..." lines, '#' starts a comment.
//   name cI2-W
//   lattice ax ay az bx by bz cx cy cz
//   basis fx fy fz          (one line per site)
//   species s0 s1 ...       (one integer per site, may span several lines)
//
// Trajectory file: extended XYZ. Per frame an atom count line, a comment line
// with box=ax,ay,az,bx,by,bz,cx,cy,cz and optional tag=<float>, then one
// "species x y z" line per atom.

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "galattice/structure.hpp"

namespace galattice::structure {

class FormatError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

UnitCell load_structure(const std::filesystem::path& path);
void save_structure(const UnitCell& cell, const std::filesystem::path& path);

std::vector<TrajectoryFrame> load_trajectory(const std::filesystem::path& path);
void save_trajectory(const std::vector<TrajectoryFrame>& frames, const std::filesystem::path& path);

}  // namespace galattice::structure
