// rng.hpp — counter-based random number generator with derived per-stream keys.
//
// Each draw is a pure function of (stream key, counter), so independent streams
// can be consumed in any order, on any number of workers, with identical output.

#pragma once

#include <cstdint>

namespace noiseloom {

class CounterRng {
  public:
    // Stream key derived by SplitMix64-style mixing of (master_seed, stream_index).
    CounterRng(std::uint64_t master_seed, std::uint64_t stream_index)
        : key_(mix64(mix64(master_seed + kGolden) ^ mix64((stream_index + 1) * kGolden))) {}

    std::uint64_t next_u64() {
        counter_ += 1;
        return mix64(key_ + counter_ * kGolden);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    static std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace noiseloom
