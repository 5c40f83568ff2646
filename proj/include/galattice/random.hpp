#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace galattice {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view s);

/// Order-sensitive mix of several 64-bit words into one seed.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

/// seed = hash(global seed, prototype name, noise level, replica index).
std::uint64_t derive_seed(std::uint64_t global, std::string_view name, double noise, std::uint64_t replica);

}  // namespace galattice
