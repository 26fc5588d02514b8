#ifndef NECO_SEEDING_HPP
#define NECO_SEEDING_HPP

#include <cstdint>

namespace neco {

// Deterministic child seed from a master seed and grid coordinates
// (splitmix64 finaliser applied per coordinate).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(mix(master) ^ a) ^ b) ^ c);
}

}  // namespace neco

#endif  // NECO_SEEDING_HPP
