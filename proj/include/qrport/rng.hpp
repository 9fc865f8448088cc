#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qrport {

/// Uniform (0,1) stream with a fixed, library-independent conversion.
///
/// Draw k is `((g() >> 11) + 0.5) * 2^-53` where g is std::mt19937_64
/// seeded with the stream seed. The half-ulp offset keeps draws strictly
/// inside (0,1). Bounded integers use rejection sampling on the raw 64-bit
/// output so shuffles are identical on every standard library.
class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed) : engine_(seed) {}

    double next() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

private:
    std::mt19937_64 engine_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Per-work-item seed from (master seed, window index, strategy label).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t window,
                                 std::string_view label) {
    return splitmix64(master ^ splitmix64(window ^ splitmix64(fnv1a(label))));
}

/// Independent sub-stream of a seed, e.g. one for BCH and one for CV folds.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(seed + 0x632be59bd9b4e019ULL * (salt + 1));
}

}  // namespace qrport
