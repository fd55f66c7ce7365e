#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "relkin/geometry.hpp"
#include "relkin/rng.hpp"

using namespace relkin;

namespace {

PhasePoint random_point(ReplicaRng& rng, double pmax = 5.0, double span = 2.0) {
    return {pmax * (2.0 * rng.next_uniform() - 1.0), span * (2.0 * rng.next_uniform() - 1.0),
            span * (2.0 * rng.next_uniform() - 1.0)};
}

double max_abs_diff(const PhasePoint& a, const PhasePoint& b) {
    return std::max({std::fabs(a.p - b.p), std::fabs(a.y - b.y), std::fabs(a.t - b.t)});
}

}  // namespace

TEST_CASE("group composition: hand-checked values") {
    const PhasePoint z{0.7, -0.3, 1.2};
    CHECK(max_abs_diff(lorentz_compose(lorentz_identity(), z), z) == 0.0);
    CHECK(max_abs_diff(lorentz_compose(z, lorentz_identity()), z) < 1e-15);

    const PhasePoint two = lorentz_compose({1, 0, 0}, {1, 0, 0});
    CHECK(two.p == Catch::Approx(2.0 * std::sqrt(2.0)).margin(1e-14));
    CHECK(two.y == 0.0);
    CHECK(two.t == 0.0);
}

TEST_CASE("group inverse: hand-checked values") {
    const PhasePoint e = lorentz_inverse(lorentz_identity());
    CHECK(max_abs_diff(e, lorentz_identity()) == 0.0);

    const PhasePoint flip = lorentz_inverse({0.0, 0.4, -0.9});
    CHECK(flip.p == 0.0);
    CHECK(flip.y == Catch::Approx(-0.4).margin(1e-15));
    CHECK(flip.t == Catch::Approx(0.9).margin(1e-15));

    const PhasePoint inv = lorentz_inverse({1.0, 1.0, 0.0});
    CHECK(inv.p == Catch::Approx(-1.0).margin(1e-15));
    CHECK(inv.y == Catch::Approx(-std::sqrt(2.0)).margin(1e-14));
    CHECK(inv.t == Catch::Approx(1.0).margin(1e-14));

    ReplicaRng rng(7, 0);
    for (int i = 0; i < 1000; ++i) {
        const PhasePoint z = random_point(rng);
        CHECK(max_abs_diff(lorentz_compose(z, lorentz_inverse(z)), lorentz_identity()) < 1e-12);
        CHECK(max_abs_diff(lorentz_compose(lorentz_inverse(z), z), lorentz_identity()) < 1e-12);
    }
}

TEST_CASE("group axioms on seeded random triples") {
    ReplicaRng rng(11, 0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const PhasePoint a = random_point(rng), b = random_point(rng), c = random_point(rng);
        const PhasePoint left = lorentz_compose(lorentz_compose(a, b), c);
        const PhasePoint right = lorentz_compose(a, lorentz_compose(b, c));
        worst = std::max(worst, max_abs_diff(left, right));
        worst = std::max(worst, max_abs_diff(lorentz_compose(a, lorentz_identity()), a));
        worst = std::max(worst, max_abs_diff(lorentz_compose(lorentz_identity(), a), a));
        worst = std::max(worst,
                         max_abs_diff(lorentz_compose(a, lorentz_inverse(a)), lorentz_identity()));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("galilean composition and the small-momentum limit") {
    const PhasePoint g = galilean_compose({1, 0, 0}, {0, 0, 1});
    CHECK(g.p == 1.0);
    CHECK(g.y == 1.0);
    CHECK(g.t == 1.0);
    CHECK(max_abs_diff(galilean_compose(lorentz_identity(), {0.3, 0.1, -0.2}), {0.3, 0.1, -0.2}) ==
          0.0);

    // The relativistic law collapses to the Galilean one at rate eps^2 in
    // the small-velocity regime (momenta and offsets of size eps).
    const auto diff = [&](double eps) {
        const PhasePoint z{0.3 * eps, -0.2 * eps, 0.7};
        return max_abs_diff(lorentz_compose({eps, 0, 0}, z), galilean_compose({eps, 0, 0}, z));
    };
    CHECK(diff(1e-2) < 1.0 * 1e-4);
    CHECK(diff(1e-3) / diff(1e-2) == Catch::Approx(0.01).epsilon(0.2));
}

TEST_CASE("boost: group structure and invariants") {
    const FourVector v{1.5, -0.3};
    const FourVector same = boost(0.0, v);
    CHECK(same.a == v.a);
    CHECK(same.b == v.b);

    ReplicaRng rng(5, 0);
    for (int i = 0; i < 1000; ++i) {
        const double beta = 1.8 * rng.next_uniform() - 0.9;
        const FourVector w{4.0 * rng.next_uniform() - 2.0, 4.0 * rng.next_uniform() - 2.0};
        const FourVector back = boost(-beta, boost(beta, w));
        CHECK(std::fabs(back.a - w.a) < 1e-12);
        CHECK(std::fabs(back.b - w.b) < 1e-12);
        const FourVector bw = boost(beta, w);
        CHECK(std::fabs((bw.a * bw.a - bw.b * bw.b) - (w.a * w.a - w.b * w.b)) < 1e-12);

        // Mass-shell invariance for energy-momentum vectors.
        const double p = 5.0 * (2.0 * rng.next_uniform() - 1.0);
        const FourVector em = boost(beta, {energy(p), p});
        CHECK(std::fabs(em.a - energy(em.b)) < 1e-12);
    }
    CHECK_THROWS_AS(boost(1.0, v), std::domain_error);
    CHECK_THROWS_AS(boost(-1.2, v), std::domain_error);
}

TEST_CASE("velocity/momentum change of variables") {
    CHECK(to_velocity(0.0) == 0.0);
    CHECK(to_velocity(1.0) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-15));
    CHECK_THROWS_AS(to_momentum(1.0), std::domain_error);
    CHECK_THROWS_AS(to_momentum(-1.5), std::domain_error);

    ReplicaRng rng(3, 0);
    for (int i = 0; i < 1000; ++i) {
        const double p = 10.0 * (2.0 * rng.next_uniform() - 1.0);
        CHECK(std::fabs(to_momentum(to_velocity(p)) - p) < 1e-12 * std::max(1.0, std::fabs(p)));
        const double phi = to_velocity(p);
        CHECK(std::fabs((1.0 - phi * phi) - 1.0 / (1.0 + p * p)) < 1e-12);
    }
}

TEST_CASE("cylinder membership at the origin") {
    const double r = 0.4;
    const Region h = cylinder(lorentz_identity(), r);
    CHECK(contains(h, {0.0, 0.0, -r * r / 2.0}));
    CHECK_FALSE(contains(h, {0.0, 0.0, 0.0}));  // strict t < 0
    CHECK_FALSE(contains(h, {r, 0.0, -r * r / 2.0}));

    const Region s = slab(lorentz_identity(), r);
    CHECK(contains(s, {0.0, 0.0, -r * r}));          // closed bottom
    CHECK(contains(s, {0.0, 0.0, -r * r / 2.0}));    // closed top
    CHECK_FALSE(contains(s, {0.0, 0.0, -r * r / 4.0}));
}

TEST_CASE("cone membership uses the |t| reading") {
    const Region p = cone(lorentz_identity(), 0.4, 0.5);
    const double t = -0.5 * 0.5 * 0.4 * 0.4 / 2.0;
    CHECK(contains(p, {0.5 * std::sqrt(-t), 0.0, t}));
    CHECK(contains(p, {std::sqrt(-t), 0.0, t}));  // closed p-face
    CHECK_FALSE(contains(p, {1.1 * std::sqrt(-t), 0.0, t}));
    CHECK_FALSE(contains(p, {0.0, 0.0, 0.0}));
}

TEST_CASE("translated membership agrees with the composed definition") {
    ReplicaRng rng(13, 0);
    for (int i = 0; i < 10000; ++i) {
        const PhasePoint z0 = random_point(rng, 2.0, 1.0);
        const double r = 0.05 + 0.45 * rng.next_uniform();
        PhasePoint zeta = random_point(rng, 2.0 * r, 2.0 * r * r);
        zeta.t = -1.5 * r * r * rng.next_uniform();

        const Region h = cylinder(z0, r);
        const bool via_compose = contains_origin(RegionKind::CylinderH, r, 0.5, zeta);
        CHECK(contains(h, lorentz_compose(z0, zeta)) == via_compose);

        // Independent route: the explicitly expanded inequalities.
        const PhasePoint z = lorentz_compose(z0, random_point(rng, 0.8, 0.3));
        CHECK(contains(h, z) == contains_explicit(h, z));
        const Region sl = slab(z0, r);
        CHECK(contains(sl, z) == contains_explicit(sl, z));
    }
}
