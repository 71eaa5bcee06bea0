#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "core/array.hpp"

namespace lswap {

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t splitmix64(uint64_t x);

// Derives a named substream seed, so independently named components of a
// seeded world never share a random stream.
uint64_t substream(uint64_t seed, const std::string& name);

// Deterministic RNG. Normal deviates use Box-Muller on top of mt19937_64 so
// the byte-for-byte sequence does not depend on the standard library's
// distribution implementations.
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    double uniform();  // [0, 1)
    double normal();   // standard normal
    uint64_t next_u64() { return engine_(); }

    Array normal_array(Shape shape, double stddev = 1.0);
    Array uniform_array(Shape shape, double lo, double hi);

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lswap
