#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "relkin/sde.hpp"

using namespace relkin;

TEST_CASE("zero-noise mode is the deterministic skeleton") {
    SdeConfig cfg;
    cfg.kind = ProcessKind::Relativistic3;
    cfg.z0 = {0.8, -0.2, 0.4};
    cfg.horizon = 0.75;
    cfg.step = 1e-3;
    cfg.replicas = 3;
    cfg.seed = 42;
    cfg.zero_noise = true;
    const PathEnsemble e = simulate(cfg);
    for (int r = 0; r < 3; ++r) {
        CHECK(e.p[r] == 0.8);
        CHECK(e.y[r] == Catch::Approx(-0.2 + 0.8 * 0.75).margin(1e-12));
        CHECK(e.t[r] == Catch::Approx(0.4 + 0.75 * energy(0.8)).margin(1e-12));
    }
    CHECK(light_cone_report(e).violating == 0);
}

TEST_CASE("determinism: identical config gives identical ensembles") {
    SdeConfig cfg;
    cfg.kind = ProcessKind::Relativistic2;
    cfg.z0 = {0.0, 0.0, 0.0};
    cfg.horizon = 0.3;
    cfg.step = 1e-3;
    cfg.replicas = 500;
    cfg.seed = 99;
    const PathEnsemble a = simulate(cfg);
    cfg.threads = 2;
    const PathEnsemble b = simulate(cfg);
    REQUIRE(a.size() == b.size());
    for (std::int64_t r = 0; r < a.size(); ++r) {
        CHECK(a.p[r] == b.p[r]);
        CHECK(a.y[r] == b.y[r]);
        CHECK(a.t[r] == b.t[r]);
    }
}

TEST_CASE("momentum stays centered from a symmetric start") {
    SdeConfig cfg;
    cfg.kind = ProcessKind::Relativistic2;
    cfg.horizon = 0.5;
    cfg.step = 1e-3;
    cfg.replicas = 100000;
    cfg.seed = 7;
    cfg.threads = 2;
    const PathEnsemble e = simulate(cfg);
    double mean = 0.0, var = 0.0;
    for (double p : e.p) mean += p;
    mean /= static_cast<double>(e.size());
    for (double p : e.p) var += (p - mean) * (p - mean);
    var /= static_cast<double>(e.size() - 1);
    const double se = std::sqrt(var / static_cast<double>(e.size()));
    CHECK(std::fabs(mean) <= 3.0 * se);
}

TEST_CASE("pathwise light cone for the relativistic processes") {
    SdeConfig cfg;
    cfg.kind = ProcessKind::Relativistic2;
    cfg.z0 = {1.5, 0.0, 0.0};
    cfg.horizon = 0.5;
    cfg.step = 1e-3;
    cfg.replicas = 20000;
    cfg.seed = 3;
    cfg.threads = 2;
    const PathEnsemble e2 = simulate(cfg);
    CHECK(light_cone_report(e2).violating == 0);
    for (std::int64_t r = 0; r < e2.size(); ++r)
        CHECK(std::fabs(e2.y[r] - cfg.z0.y) < cfg.horizon);

    cfg.kind = ProcessKind::Relativistic3;
    const PathEnsemble e3 = simulate(cfg);
    CHECK(light_cone_report(e3).violating == 0);

    // The classical process from p0 = 3 shows the motivating defect.
    cfg.kind = ProcessKind::Classical;
    cfg.z0 = {3.0, 0.0, 0.0};
    const PathEnsemble ec = simulate(cfg);
    CHECK(light_cone_report(ec).fraction > 0.0);
}

TEST_CASE("classical process matches the exact Gaussian moments") {
    SdeConfig cfg;
    cfg.kind = ProcessKind::Classical;
    cfg.horizon = 1.0;
    cfg.step = 1e-3;
    cfg.replicas = 1000000;
    cfg.seed = 2024;
    cfg.threads = 2;
    const PathEnsemble e = simulate(cfg);
    double mp = 0.0, my = 0.0;
    for (std::int64_t r = 0; r < e.size(); ++r) {
        mp += e.p[r];
        my += e.y[r];
    }
    mp /= static_cast<double>(e.size());
    my /= static_cast<double>(e.size());
    double vpp = 0.0, vpy = 0.0, vyy = 0.0;
    for (std::int64_t r = 0; r < e.size(); ++r) {
        vpp += (e.p[r] - mp) * (e.p[r] - mp);
        vpy += (e.p[r] - mp) * (e.y[r] - my);
        vyy += (e.y[r] - my) * (e.y[r] - my);
    }
    vpp /= static_cast<double>(e.size());
    vpy /= static_cast<double>(e.size());
    vyy /= static_cast<double>(e.size());
    // Exact covariance at s = 1: (2s, s^2; s^2, 2 s^3 / 3).
    CHECK(vpp == Catch::Approx(2.0).epsilon(0.05));
    CHECK(vpy == Catch::Approx(1.0).epsilon(0.05));
    CHECK(vyy == Catch::Approx(2.0 / 3.0).epsilon(0.05));
}

TEST_CASE("density estimate: delta limit and unit mass bound") {
    SdeConfig cfg;
    cfg.kind = ProcessKind::Relativistic2;
    cfg.horizon = 0.1;
    cfg.step = 0.1;
    cfg.replicas = 1;
    cfg.seed = 1;
    cfg.zero_noise = true;
    cfg.z0 = {0.0, 0.305, 0.0};  // lands on a cell center after drift 0
    PathEnsemble e = simulate(cfg);
    e.p[0] = 0.05;  // exact cell center of the grid below
    e.y[0] = 0.305;

    DensityGrid grid;
    grid.p_min = -1.0;
    grid.p_max = 1.0;
    grid.y_min = -1.0;
    grid.y_max = 1.0;
    grid.np = 20;
    grid.ny = 200;
    const DensityEstimate d = estimate_density(e, grid, {1e-3, 1e-3});
    CHECK(d.total_mass() <= 1.0 + 1e-9);
    const int ic = static_cast<int>((0.05 - grid.p_min) / grid.dp());
    const int jc = static_cast<int>((0.305 - grid.y_min) / grid.dy());
    CHECK(d.at(ic, jc) * grid.dp() * grid.dy() > 0.99);

    CHECK_THROWS_AS(estimate_density(PathEnsemble{}, grid), std::invalid_argument);
}

TEST_CASE("density estimate integrates to at most one") {
    SdeConfig cfg;
    cfg.kind = ProcessKind::Relativistic2;
    cfg.horizon = 0.5;
    cfg.step = 1e-3;
    cfg.replicas = 20000;
    cfg.seed = 17;
    cfg.threads = 2;
    const PathEnsemble e = simulate(cfg);
    DensityGrid grid;
    grid.p_min = -4.0;
    grid.p_max = 4.0;
    grid.y_min = -0.8;
    grid.y_max = 0.8;
    grid.np = 160;
    grid.ny = 80;
    const DensityEstimate d = estimate_density(e, grid);
    CHECK(d.total_mass() <= 1.0 + 1e-9);
    CHECK(d.total_mass() > 0.9);
    for (double v : d.values) CHECK(v >= 0.0);
}

TEST_CASE("halving the step leaves the density within statistical noise") {
    DensityGrid grid;
    grid.p_min = -3.0;
    grid.p_max = 3.0;
    grid.y_min = -0.6;
    grid.y_max = 0.6;
    grid.np = 60;
    grid.ny = 60;

    SdeConfig cfg;
    cfg.kind = ProcessKind::Relativistic2;
    cfg.horizon = 0.4;
    cfg.replicas = 40000;
    cfg.threads = 2;
    cfg.step = 2e-3;
    cfg.seed = 31;
    const DensityEstimate da = estimate_density(simulate(cfg), grid, {0.1, 0.03});
    cfg.step = 1e-3;
    cfg.seed = 32;
    const DensityEstimate db = estimate_density(simulate(cfg), grid, {0.1, 0.03});
    cfg.seed = 33;
    const DensityEstimate dc = estimate_density(simulate(cfg), grid, {0.1, 0.03});

    const auto l1 = [&](const DensityEstimate& u, const DensityEstimate& v) {
        double acc = 0.0;
        for (std::size_t i = 0; i < u.values.size(); ++i)
            acc += std::fabs(u.values[i] - v.values[i]);
        return acc * grid.dp() * grid.dy();
    };
    // Step bias (da vs db) is within twice the pure-noise level (db vs dc).
    CHECK(l1(da, db) <= 2.0 * l1(db, dc));
}
