#pragma once

#include <cmath>
#include <span>

namespace a2r {

// Centered vectors with norm at or below this are treated as zero: their
// cosine similarity to anything is defined as 0, i.e. distance 1.
inline constexpr double kZeroNorm = 1e-12;

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Cosine distance 1 - cos(q, b) between already-centered vectors, in [0, 2].
inline double cosine_distance(std::span<const double> q, std::span<const double> b) {
    const double nq = norm(q);
    const double nb = norm(b);
    if (nq <= kZeroNorm || nb <= kZeroNorm) return 1.0;
    return 1.0 - dot(q, b) / (nq * nb);
}

}  // namespace a2r
