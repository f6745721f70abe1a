#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace addt {

// Numerically stable logistic function.
inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Stable softmax; output sums to 1 (up to rounding).
inline void softmax_into(std::span<const double> logits, std::span<double> out) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
}

inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    softmax_into(logits, out);
    return out;
}

// Argmax with lowest-index tie resolution; the single tie rule used everywhere.
inline int argmax_lowest(std::span<const double> v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

// FNV-1a, used to fingerprint configurations in file headers.
inline std::uint64_t fnv1a(std::span<const char> bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace addt
