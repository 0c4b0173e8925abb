#pragma once

#include <cmath>
#include <cstdint>

namespace mcpet {

//! SplitMix64 finaliser: a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/*!
 * Counter-based stream: draw k is mix64(key + (k + 1) * golden), where the
 * key mixes the master seed with a stream id. Distinct stream ids give
 * independent-looking sequences from one seed.
 */
class RandomStream
{
  public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : key_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ull)))
    {
    }

    std::uint64_t next()
    {
        key_ += 0x9e3779b97f4a7c15ull;
        return mix64(key_);
    }

    //! Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    //! Exponential with the given rate (rate > 0).
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  private:
    std::uint64_t key_;
};

}  // namespace mcpet
