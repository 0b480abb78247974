#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace obfugraph {

// Seeded RNG wrapper. The engine (mt19937_64) has a standard-mandated
// sequence; the bound/real mappings below are ours, so streams are
// byte-identical across platforms and standard library versions.
// std::uniform_*_distribution is implementation-defined and must not be
// used anywhere determinism matters.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of randomness.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound). Fixed-point multiply; bias < 2^-64.
    uint64_t below(uint64_t bound) {
        if (bound <= 1) return 0;
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(engine_()) * bound) >> 64);
    }

    size_t index(size_t n) { return static_cast<size_t>(below(n)); }

    // Uniform integer in [lo, hi] inclusive.
    int64_t int_range(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    double range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Log-uniform in [lo, hi], lo > 0.
    double log_range(double lo, double hi);

    bool chance(double p) { return next_double() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Index into a discrete weight table (weights need not be normalized).
    size_t weighted_index(const std::vector<double>& weights);

private:
    std::mt19937_64 engine_;
};

// SplitMix64 step, used to derive independent child seeds from a parent
// seed plus salts (function index, transform id, tree index, ...).
uint64_t mix_seed(uint64_t seed);
uint64_t derive_seed(uint64_t seed, uint64_t salt);
uint64_t derive_seed(uint64_t seed, uint64_t salt1, uint64_t salt2);
uint64_t hash_string(const std::string& s);

}  // namespace obfugraph
