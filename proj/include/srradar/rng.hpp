#ifndef SRRADAR_RNG_HPP
#define SRRADAR_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace srradar
{

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Purposes for which independent streams are derived from one master seed.
enum class Stream : std::uint64_t
{
    probe    = 1,
    scene    = 2,
    noise    = 3,
    signs    = 4,
    generic  = 5,
};

///
/// Counter-based split of a master seed: every (trial, purpose) pair gets its
/// own well-mixed 64-bit seed, independent of evaluation order.
///
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial,
                                 Stream purpose)
{
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ (trial * 0xd1b54a32d192ed03ULL));
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    return h;
}

inline Rng make_rng(std::uint64_t master, std::uint64_t trial, Stream purpose)
{
    return Rng(derive_seed(master, trial, purpose));
}

} // namespace srradar

#endif
