#include "obfugraph/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace obfugraph {

double Rng::log_range(double lo, double hi) {
    return std::exp(range(std::log(lo), std::log(hi)));
}

size_t Rng::weighted_index(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw std::invalid_argument("weighted_index: non-positive weight total");
    double x = next_double() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (x < acc) return i;
    }
    return weights.size() - 1;
}

uint64_t mix_seed(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t seed, uint64_t salt) {
    return mix_seed(seed ^ mix_seed(salt));
}

uint64_t derive_seed(uint64_t seed, uint64_t salt1, uint64_t salt2) {
    return derive_seed(derive_seed(seed, salt1), salt2);
}

uint64_t hash_string(const std::string& s) {
    // FNV-1a 64-bit
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace obfugraph
