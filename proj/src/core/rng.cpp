#include "core/rng.hpp"

#include <cmath>

namespace lswap {

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t substream(uint64_t seed, const std::string& name) {
    return splitmix64(seed ^ fnv1a64(name.data(), name.size()));
}

double Rng::uniform() {
    // 53-bit mantissa, [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Array Rng::normal_array(Shape shape, double stddev) {
    Array a(std::move(shape));
    for (size_t i = 0; i < a.size(); ++i) a[i] = stddev * normal();
    return a;
}

Array Rng::uniform_array(Shape shape, double lo, double hi) {
    Array a(std::move(shape));
    for (size_t i = 0; i < a.size(); ++i) a[i] = lo + (hi - lo) * uniform();
    return a;
}

}  // namespace lswap
