#pragma once

#include <cstdint>
#include <random>

#include "rfr/tensor.hpp"

namespace rfr {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and up to two stream
/// indices. Used everywhere randomness must be reproducible per
/// (iteration, sample, purpose) without sharing engine state.
inline uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b = 0) {
    return splitmix64(splitmix64(base ^ 0x6a09e667f3bcc909ULL) + splitmix64(a) * 3 + b);
}

class Rng {
   public:
    explicit Rng(uint64_t seed) : eng_(splitmix64(seed)) {}

    /// Uniform draw in [0,1).
    double uniform() { return unif_(eng_); }

    /// Standard normal draw.
    double gaussian() { return normal_(eng_); }

    uint64_t next_u64() { return eng_(); }

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        return lo + int(eng_() % uint64_t(hi - lo + 1));
    }

    double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

   private:
    std::mt19937_64 eng_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

template <typename T>
Tensor<T> gaussian_tensor(int c, int h, int w, Rng& rng) {
    Tensor<T> t(c, h, w);
    for (auto& v : t.data) v = static_cast<T>(rng.gaussian());
    return t;
}

template <typename T>
Tensor<T> gaussian_tensor(int c, int h, int w, uint64_t seed) {
    Rng rng(seed);
    return gaussian_tensor<T>(c, h, w, rng);
}

}  // namespace rfr
