#pragma once

// Lorentz and Galilean group operations on the (momentum, position, time)
// state space, boosts of four-vectors, the momentum/velocity change of
// variables and the invariant cylinders, slabs and cones used by the
// Harnack machinery. Natural units: c = 1, rest mass 1.

#include <cmath>
#include <stdexcept>

namespace relkin {

/// A point (p, y, t) of momentum-position-time state space.
struct PhasePoint {
    double p = 0.0;
    double y = 0.0;
    double t = 0.0;

    friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

/// A contravariant pair: (t, y) or (E, p). `a` is the time-like component.
struct FourVector {
    double a = 0.0;
    double b = 0.0;
};

/// Energy of a particle with momentum p on the unit mass shell.
inline double energy(double p) { return std::sqrt(p * p + 1.0); }

/// Relativistic velocity, |to_velocity(p)| < 1 for all finite p.
inline double to_velocity(double p) { return p / std::sqrt(1.0 + p * p); }

/// Inverse of to_velocity; defined for |x| < 1 only.
inline double to_momentum(double x) {
    if (!(std::fabs(x) < 1.0))
        throw std::domain_error("to_momentum: |x| must be < 1");
    return x / std::sqrt(1.0 - x * x);
}

/// Derivative of to_velocity, (1 + p^2)^{-3/2}.
inline double to_velocity_prime(double p) {
    const double e2 = 1.0 + p * p;
    return 1.0 / (e2 * std::sqrt(e2));
}

inline PhasePoint lorentz_identity() { return {0.0, 0.0, 0.0}; }

/// Group operation z0 * z of the Lorentz group structure on R^3.
inline PhasePoint lorentz_compose(const PhasePoint& z0, const PhasePoint& z) {
    const double e0 = energy(z0.p);
    const double e = energy(z.p);
    return {z.p * e0 + z0.p * e,
            z0.y + z.y * e0 + z0.p * z.t,
            z0.t + z.t * e0 + z0.p * z.y};
}

/// Group inverse: lorentz_compose(z, lorentz_inverse(z)) is the identity.
inline PhasePoint lorentz_inverse(const PhasePoint& z) {
    const double e = energy(z.p);
    return {-z.p, z.p * z.t - z.y * e, -z.t * e + z.p * z.y};
}

/// z0^{-1} * z, the frame reduction moving z0 to the origin.
inline PhasePoint lorentz_reduce(const PhasePoint& z0, const PhasePoint& z) {
    return lorentz_compose(lorentz_inverse(z0), z);
}

/// Non-relativistic (Galilean) composition law.
inline PhasePoint galilean_compose(const PhasePoint& z0, const PhasePoint& z) {
    return {z0.p + z.p, z0.y + z.y + z.t * z0.p, z0.t + z.t};
}

inline double lorentz_gamma(double beta) {
    if (!(std::fabs(beta) < 1.0))
        throw std::domain_error("lorentz_gamma: |beta| must be < 1 (superluminal frame)");
    return 1.0 / std::sqrt(1.0 - beta * beta);
}

/// Boost of a four-vector into the frame moving with velocity beta.
/// The inverse transform is boost(-beta, .).
inline FourVector boost(double beta, const FourVector& v) {
    const double g = lorentz_gamma(beta);
    return {g * (v.a - beta * v.b), g * (v.b - beta * v.a)};
}

/// Image of a phase point under the boost with frame velocity beta:
/// (t, y) and (E, p) both transform as four-vectors, and the new momentum
/// keeps the mass-shell relation E = sqrt(p^2 + 1).
inline PhasePoint boost_point(double beta, const PhasePoint& z) {
    const double g = lorentz_gamma(beta);
    const double e = energy(z.p);
    return {g * (z.p - beta * e), g * (z.y - beta * z.t), g * (z.t - beta * z.y)};
}

enum class RegionKind { CylinderH, SlabS, ConeP };

/// Invariant region r-scaled around `center`: membership of z is tested by
/// reducing z to the origin frame of the center and applying the
/// origin-centered inequalities.
struct Region {
    RegionKind kind = RegionKind::CylinderH;
    PhasePoint center{};
    double r = 0.0;
    double theta = 0.5;  // cone only

    Region(RegionKind k, const PhasePoint& c, double radius, double th = 0.5)
        : kind(k), center(c), r(radius), theta(th) {
        if (!(r > 0.0)) throw std::invalid_argument("Region: r must be positive");
        if (k == RegionKind::ConeP && !(th > 0.0 && th < 1.0))
            throw std::invalid_argument("Region: theta must be in (0,1)");
    }
};

inline Region cylinder(const PhasePoint& z0, double r) {
    return Region(RegionKind::CylinderH, z0, r);
}
inline Region slab(const PhasePoint& z0, double r) {
    return Region(RegionKind::SlabS, z0, r);
}
inline Region cone(const PhasePoint& z0, double r, double theta) {
    return Region(RegionKind::ConeP, z0, r, theta);
}

/// Origin-centered membership tests. The cylinder uses strict inequalities
/// and the slab closed t-bounds, exactly as defined. The cone reads the
/// negative-time bounds as |t|^{1/2}, |t|^{3/2} and is closed on the p and y
/// faces, matching the path estimates it gates (the literal strict form with
/// t^{1/2} for t < 0 would be empty).
inline bool contains_origin(RegionKind kind, double r, double theta, const PhasePoint& z) {
    const double r2 = r * r;
    switch (kind) {
        case RegionKind::CylinderH:
            return std::fabs(z.p) < r && std::fabs(z.y) < r2 * r && -r2 < z.t && z.t < 0.0;
        case RegionKind::SlabS:
            return std::fabs(z.p) < r && std::fabs(z.y) < r2 * r && -r2 <= z.t &&
                   z.t <= -r2 / 2.0;
        case RegionKind::ConeP: {
            if (!(z.t < 0.0 && z.t >= -theta * theta * r2)) return false;
            const double at = std::fabs(z.t);
            const double rt = std::sqrt(at);
            return std::fabs(z.p) <= rt && std::fabs(z.y) <= at * rt;
        }
    }
    return false;
}

inline bool contains(const Region& region, const PhasePoint& z) {
    return contains_origin(region.kind, region.r, region.theta,
                           lorentz_reduce(region.center, z));
}

/// Cylinder/slab membership from the explicitly expanded inequalities,
/// bypassing the group reduction. Kept as an independent route for
/// cross-checking `contains`.
inline bool contains_explicit(const Region& region, const PhasePoint& z) {
    if (region.kind == RegionKind::ConeP)
        return contains(region, z);
    const PhasePoint& z0 = region.center;
    const double e0 = energy(z0.p);
    const double r = region.r, r2 = r * r;
    const double u = z.p * e0 - z0.p * energy(z.p);
    const double v = e0 * (z.y - z0.y) - z0.p * (z.t - z0.t);
    const double w = e0 * (z.t - z0.t) - z0.p * (z.y - z0.y);
    if (!(std::fabs(u) < r && std::fabs(v) < r2 * r)) return false;
    if (region.kind == RegionKind::CylinderH) return -r2 < w && w < 0.0;
    return -r2 <= w && w <= -r2 / 2.0;
}

}  // namespace relkin
