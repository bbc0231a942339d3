#pragma once

#include "fbpush/calg.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fbpush {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(seed ^ splitmix64(tag + 0x5851F42D4C957F2DULL));
}

// Additive recurrence with the generalized golden ratio (the R_d sequence),
// rotated by a seed-derived offset.
class LowDiscrepancy {
public:
    LowDiscrepancy(std::size_t dims, std::uint64_t seed) : alpha_(dims), offset_(dims) {
        double phi = 2.0;
        for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(dims + 1));
        std::uint64_t s = seed;
        for (std::size_t i = 0; i < dims; ++i) {
            alpha_[i] = std::fmod(1.0 / std::pow(phi, static_cast<double>(i + 1)), 1.0);
            s = splitmix64(s);
            offset_[i] = static_cast<double>(s >> 11) * 0x1.0p-53;
        }
    }

    std::size_t dims() const { return alpha_.size(); }

    // Coordinates lie in (0, 1).
    std::vector<double> point(std::uint64_t m) const {
        std::vector<double> u(alpha_.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            double v = offset_[i] + alpha_[i] * static_cast<double>(m + 1);
            v -= std::floor(v);
            u[i] = std::clamp(v, 0x1.0p-53, 1.0 - 0x1.0p-53);
        }
        return u;
    }

private:
    std::vector<double> alpha_, offset_;
};

// Maps 2n+1 uniforms to a point of the closed ball of radius r about c in C^n.
// With on_boundary the last uniform is ignored and the point lies on the sphere.
inline CVec uniforms_to_ball(const double* u, const CVec& c, double r, bool on_boundary) {
    const auto n = c.size();
    CVec g(n);
    double norm2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double rad = std::sqrt(-2.0 * std::log(u[2 * i]));
        const double ang = 2.0 * std::numbers::pi * u[2 * i + 1];
        g[i] = std::polar(rad, ang);
        norm2 += rad * rad;
    }
    if (n == 0) return c;
    const double radius = on_boundary ? r : r * std::pow(u[2 * n], 1.0 / static_cast<double>(2 * n));
    return c + g * (radius / std::sqrt(norm2));
}

// Maps 2n+1 uniforms to the closed polydisc; on the boundary one coordinate,
// chosen by the last uniform, sits on its circle.
inline CVec uniforms_to_polydisc(const double* u, const CVec& c, const std::vector<double>& radii, bool on_boundary) {
    const auto n = c.size();
    CVec x(n);
    const auto pick = static_cast<Eigen::Index>(std::min<double>(std::floor(u[2 * n] * static_cast<double>(n)),
                                                                 static_cast<double>(n - 1)));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double rho = (on_boundary && i == pick) ? 1.0 : std::sqrt(u[2 * i]);
        x[i] = c[i] + std::polar(radii[static_cast<std::size_t>(i)] * rho, 2.0 * std::numbers::pi * u[2 * i + 1]);
    }
    return x;
}

}  // namespace fbpush
