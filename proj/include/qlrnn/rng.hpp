#pragma once

#include <cstdint>
#include <vector>

namespace qlrnn {

// splitmix64: counter-based generator (Steele et al.). Pure 64-bit integer
// arithmetic, so identical seeds give identical streams on every platform.
// This is the only randomness source in the project; std::mt19937 and
// std::uniform_*_distribution are avoided because their outputs are not
// specified identically across standard library implementations.
struct Rng {
    std::uint64_t state = 0;

    Rng() = default;
    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        state += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n > 0. Rejection-free multiply-shift map;
    // the tiny bias is irrelevant here, determinism is what matters.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }
};

// Derive an independent stream from (seed, salt), e.g. one per epoch.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    Rng r(seed ^ (0xD1B54A32D192ED03ull * (salt + 1)));
    return r.next_u64();
}

}  // namespace qlrnn
