#pragma once

#include <cassert>
#include <cstdint>
#include <random>

namespace trajforge {

// Deterministic generator behind every randomized dataloader stage.
//
// The raw stream is std::mt19937_64, whose output sequence is fixed by the
// C++ standard, so identical seeds give identical streams on every platform.
// Bounded draws use rejection sampling and unit doubles use the top 53 bits;
// std::uniform_*_distribution is avoided because its mapping is
// implementation-defined. This generator is part of the reproducibility
// contract: swapping it is a breaking change for stored stream expectations.
class DeterministicRng {
  public:
    explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, n), n >= 1.
    std::size_t uniform_index(std::size_t n) {
        assert(n >= 1);
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x >= threshold) {
                return static_cast<std::size_t>(x % bound);
            }
        }
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace trajforge
