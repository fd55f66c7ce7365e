#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "relkin/control.hpp"
#include "relkin/rng.hpp"

using namespace relkin;

TEST_CASE("running cost of piecewise-constant controls") {
    CHECK(ControlFunction::constant(0.0, 2.0).cost(2.0) == 0.0);
    CHECK(ControlFunction::constant(1.0, 2.0).cost(2.0) == Catch::Approx(2.0).margin(1e-15));
    const ControlFunction pw = ControlFunction::piecewise({0.0, 1.0, 1.5}, {1.0, -2.0});
    CHECK(pw.cost(1.5) == Catch::Approx(3.0).margin(1e-15));
    CHECK(pw.cost(0.5) == Catch::Approx(0.5).margin(1e-15));
    CHECK_THROWS_AS(pw.cost(2.0), std::invalid_argument);
}

TEST_CASE("admissible path: zero control and the arcsinh closed form") {
    const AdmissiblePath rest = integrate_path(ControlFunction::constant(0.0, 1.0), {0, 0, 0});
    const PhasePoint end = rest.endpoint();
    CHECK(end.p == Catch::Approx(0.0).margin(1e-12));
    CHECK(end.y == Catch::Approx(0.0).margin(1e-12));
    CHECK(end.t == Catch::Approx(-1.0).margin(1e-12));

    for (double c : {0.5, 1.0, -1.7}) {
        const AdmissiblePath path = integrate_path(ControlFunction::constant(c, 1.2), {0, 0, 0});
        for (std::size_t i = 0; i < path.s.size(); i += 100)
            CHECK(path.z[i].p == Catch::Approx(std::sinh(c * path.s[i])).margin(1e-8));
    }
}

TEST_CASE("path integration matches the exact segment maps") {
    const ControlFunction pw =
        ControlFunction::piecewise({0.0, 0.4, 0.9, 1.3}, {0.8, -0.5, 1.9});
    const PhasePoint z0{0.3, -0.1, 0.6};
    const PhasePoint rk4 = integrate_path(pw, z0, 5e-4).endpoint();
    const PhasePoint exact = exact_path_endpoint(pw, z0);
    CHECK(rk4.p == Catch::Approx(exact.p).margin(1e-8));
    CHECK(rk4.y == Catch::Approx(exact.y).margin(1e-8));
    CHECK(rk4.t == Catch::Approx(exact.t).margin(1e-8));
}

TEST_CASE("translated start reproduces the group-translated origin path") {
    const ControlFunction w = ControlFunction::piecewise({0.0, 0.5, 1.0}, {1.2, -0.3});
    const PhasePoint z0{0.7, 0.4, -0.2};
    const AdmissiblePath from_z0 = integrate_path(w, z0);
    const AdmissiblePath from_origin = integrate_path(w, {0, 0, 0});
    for (std::size_t i = 0; i < from_z0.s.size(); i += 50) {
        const PhasePoint translated = lorentz_compose(z0, from_origin.z[i]);
        CHECK(from_z0.z[i].p == Catch::Approx(translated.p).margin(1e-8));
        CHECK(from_z0.z[i].y == Catch::Approx(translated.y).margin(1e-8));
        CHECK(from_z0.z[i].t == Catch::Approx(translated.t).margin(1e-8));
    }
}

TEST_CASE("light cone holds along every admissible path") {
    ReplicaRng rng(41, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const double w1 = 4.0 * (2.0 * rng.next_uniform() - 1.0);
        const double w2 = 4.0 * (2.0 * rng.next_uniform() - 1.0);
        const AdmissiblePath path =
            integrate_path(ControlFunction::piecewise({0.0, 0.3, 0.8}, {w1, w2}), {0, 0, 0});
        for (std::size_t i = 1; i < path.s.size(); ++i) {
            CHECK(path.z[i].t < path.z[i - 1].t);
            CHECK(std::fabs(path.z[i].y) < -path.z[i].t);
        }
    }
}

TEST_CASE("extremals: conserved energy and the cost identity") {
    // k = 0, c2 = 0 pins lambda1 at zero: the zero-control trajectory.
    const Extremal rest = integrate_extremal(0.0, 0.0, 0.7, 1.0);
    CHECK(rest.endpoint().p == 0.0);
    CHECK(rest.endpoint().y == 0.0);
    CHECK(rest.endpoint().t == Catch::Approx(-1.0).margin(1e-12));
    CHECK(rest.cost == 0.0);

    ReplicaRng rng(43, 0);
    for (int trial = 0; trial < 30; ++trial) {
        const double k = 2.0 * rng.next_uniform() - 1.0;
        const double c2 = 2.0 * rng.next_uniform() - 1.0;
        const double c3 = 2.0 * rng.next_uniform() - 1.0;
        const Extremal ext = integrate_extremal(k, c2, c3, 1.0);
        CHECK(std::fabs(ext.energy0 - (k * k - 2.0 * c3)) < 1e-12);
        CHECK(ext.max_energy_drift <= 1e-8);
        const PhasePoint end = ext.endpoint();
        const double identity = ext.energy0 * ext.T - 2.0 * c2 * end.y - 2.0 * c3 * end.t;
        CHECK(std::fabs(ext.cost - identity) <= 1e-6);
    }

    // Large positive c3 drives p' ~ p^{3/2}, a finite-time blowup.
    CHECK_THROWS_AS(integrate_extremal(2.0, 0.0, 50.0, 2.0), ExtremalDiverged);
}

TEST_CASE("reachability is the strict backward light cone") {
    CHECK_FALSE(reachable({0.2, 0.1, 0.3}, {0.2, 0.1, 0.3}));
    CHECK(reachable({0, 0, 0}, {0, 0, -1}));
    CHECK_FALSE(reachable({0, 0, 0}, {0, 2, -1}));
    CHECK_FALSE(reachable({0, 0, 0}, {0, 0, 1}));
    CHECK(reachable({0, 0, 0}, {0.4, 0.3, -0.5}));
}

TEST_CASE("value function: zero-control orbit") {
    ShootingOptions opt;
    opt.cross_check = false;
    const ValueResult vr = value_function({0, 0, 0}, {0, 0, -1}, opt);
    CHECK(vr.converged);
    CHECK(vr.psi <= 1e-6);
    CHECK_THROWS_AS(value_function({0, 0, 0}, {0, 0, 1}), std::invalid_argument);
}

TEST_CASE("value function agrees with the transcription oracle") {
    const ValueResult vr = value_function({0, 0, 0}, {0.2, -0.05, -0.5});
    REQUIRE(vr.converged);
    REQUIRE(vr.oracle_cost.has_value());
    CHECK(vr.psi > 0.0);
    CHECK(std::fabs(vr.psi - *vr.oracle_cost) / std::max(vr.psi, *vr.oracle_cost) < 0.05);
    CHECK_FALSE(vr.oracle_gap_flag);
}

TEST_CASE("value function is group invariant") {
    ShootingOptions opt;
    opt.cross_check = false;
    ReplicaRng rng(47, 0);
    for (int trial = 0; trial < 5; ++trial) {
        const PhasePoint target{0.6 * (2.0 * rng.next_uniform() - 1.0),
                                0.2 * (2.0 * rng.next_uniform() - 1.0),
                                -0.4 - 0.6 * rng.next_uniform()};
        if (!reachable({0, 0, 0}, target)) continue;
        const PhasePoint g{1.5 * (2.0 * rng.next_uniform() - 1.0),
                           2.0 * rng.next_uniform() - 1.0, 2.0 * rng.next_uniform() - 1.0};
        const ValueResult base = value_function({0, 0, 0}, target, opt);
        const ValueResult moved = value_function(g, lorentz_compose(g, target), opt);
        REQUIRE(base.converged);
        REQUIRE(moved.converged);
        CHECK(std::fabs(base.psi - moved.psi) <= 1e-6 * std::max(1.0, base.psi));
    }
}

TEST_CASE("recovered optimal control closes the loop through the path integrator") {
    const ValueResult vr = value_function({0, 0, 0}, {0.3, 0.05, -0.8});
    REQUIRE(vr.converged);
    const Extremal& ext = vr.best;
    std::vector<double> bps(ext.s.begin(), ext.s.end());
    std::vector<double> vals;
    for (std::size_t i = 0; i + 1 < ext.s.size(); ++i)
        vals.push_back(0.5 * (ext.optimal_control(i) + ext.optimal_control(i + 1)));
    const ControlFunction w_star = ControlFunction::piecewise(std::move(bps), std::move(vals));
    const PhasePoint end = integrate_path(w_star, {0, 0, 0}, 2e-4).endpoint();
    CHECK(std::fabs(end.p - 0.3) < 1e-6);
    CHECK(std::fabs(end.y - 0.05) < 1e-6);
    CHECK(std::fabs(end.t - (-0.8)) < 1e-6);
    // The recovered control's cost reproduces the reported value.
    CHECK(w_star.cost(w_star.horizon()) == Catch::Approx(vr.psi).epsilon(1e-4));
}

TEST_CASE("direct transcription: feasible zero-cost target and refinement stability") {
    const TranscriptionResult zero = direct_transcription({0, 0, -1});
    CHECK(zero.converged);
    CHECK(zero.cost <= 1e-6);
    CHECK(zero.residual <= 1e-4);

    TranscriptionOptions opt;
    opt.intervals = 24;
    const TranscriptionResult coarse = direct_transcription({0.25, -0.04, -0.6}, opt);
    opt.intervals = 48;
    const TranscriptionResult fine = direct_transcription({0.25, -0.04, -0.6}, opt);
    REQUIRE(coarse.converged);
    REQUIRE(fine.converged);
    CHECK(std::fabs(coarse.cost - fine.cost) / std::max(coarse.cost, fine.cost) < 0.02);

    // Candidate controls cannot beat the verified extremal minimum.
    ShootingOptions sopt;
    sopt.cross_check = false;
    const ValueResult vr = value_function({0, 0, 0}, {0.25, -0.04, -0.6}, sopt);
    REQUIRE(vr.converged);
    CHECK(fine.cost >= vr.psi - 1e-3);

    CHECK_THROWS_AS(direct_transcription({0, 0, 1}), std::invalid_argument);
    TranscriptionOptions bad;
    bad.intervals = 5;
    CHECK_THROWS_AS(direct_transcription({0, 0, -1}, bad), std::invalid_argument);
}
