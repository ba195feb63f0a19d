#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lmapf {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Every stochastic component draws from a named stream of one root seed:
//   stream_seed(root, name)        = splitmix64(root ^ fnv1a64(name))
//   stream_seed(root, name, index) = splitmix64(stream_seed(root, name) + index)
// Names in use: "assigner", "tiebreak", "lns", "disable", "starts", "map".
inline constexpr std::uint64_t stream_seed(std::uint64_t root, std::string_view name) {
  return splitmix64(root ^ fnv1a64(name));
}

inline constexpr std::uint64_t stream_seed(std::uint64_t root, std::string_view name, std::uint64_t index) {
  return splitmix64(stream_seed(root, name) + index);
}

inline Rng make_rng(std::uint64_t root, std::string_view name) { return Rng(stream_seed(root, name)); }

inline Rng make_rng(std::uint64_t root, std::string_view name, std::uint64_t index) {
  return Rng(stream_seed(root, name, index));
}

}  // namespace lmapf
