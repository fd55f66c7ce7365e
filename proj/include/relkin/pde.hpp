#pragma once

// Finite-difference solution of the transformed kinetic equation
//     u_t + x u_y = a(x) u_xx + b(x) u_x + source
// on x in (-1,1), with the closed-form coefficient pair and its bounded
// modification, Cauchy problems, the lens-domain Dirichlet problem, Green
// function values at the origin, and a flux-form momentum diffusion solver.
//
// Scheme: explicit Euler in time, centered second difference for the
// diffusion, centered first difference for b u_x (monotone under the cell
// Peclet bound |b| dx <= 2 a, validated up front), first-order upwind for
// the transport x u_y. The update is a convex combination of neighbor
// values under the validated step bound, so constants are preserved and the
// discrete comparison principle holds exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <thread>
#include <vector>

#include "relkin/geometry.hpp"

namespace relkin {

enum class CoefficientVariant { Original, Modified };

/// Coefficients a(x), b(x) of the transformed equation. The original pair is
/// defined on (-1,1) and degenerates at the ends; the modified pair freezes
/// the values of |x| = 1/2 outside, so it is uniformly parabolic.
struct CoefficientSet {
    CoefficientVariant variant = CoefficientVariant::Original;

    static double a_original(double x) { return std::pow(1.0 - x * x, 2.5); }
    static double b_original(double x) { return -2.0 * x * std::pow(1.0 - x * x, 1.5); }

    double a(double x) const {
        if (variant == CoefficientVariant::Original) {
            require_open_interval(x);
            return a_original(x);
        }
        return std::fabs(x) <= 0.5 ? a_original(x) : std::pow(0.75, 2.5);
    }
    double b(double x) const {
        if (variant == CoefficientVariant::Original) {
            require_open_interval(x);
            return b_original(x);
        }
        if (std::fabs(x) <= 0.5) return b_original(x);
        return (x > 0 ? -1.0 : 1.0) * std::pow(0.75, 1.5);
    }

  private:
    static void require_open_interval(double x) {
        if (!(std::fabs(x) < 1.0))
            throw std::domain_error("CoefficientSet: original coefficients need |x| < 1");
    }
};

inline std::pair<double, double> coefficients(double x, CoefficientVariant variant) {
    const CoefficientSet c{variant};
    return {c.a(x), c.b(x)};
}

/// Uniform node-centered grid: nodes x_i = x_min + i dx, i = 0..nx.
struct PdeGrid {
    double x_min = -0.9, x_max = 0.9;
    double y_min = -1.0, y_max = 1.0;
    int nx = 90, ny = 100;

    double dx() const { return (x_max - x_min) / nx; }
    double dy() const { return (y_max - y_min) / ny; }
    double x(int i) const { return x_min + i * dx(); }
    double y(int j) const { return y_min + j * dy(); }
    std::size_t nodes() const { return static_cast<std::size_t>(nx + 1) * (ny + 1); }
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * (ny + 1) + j; }
};

struct GridField {
    PdeGrid grid;
    double time = 0.0;
    std::vector<double> values;

    double at(int i, int j) const { return values[grid.idx(i, j)]; }

    /// Bilinear interpolation; throws outside the grid.
    double interpolate(double x, double y) const {
        const double fx = (x - grid.x_min) / grid.dx();
        const double fy = (y - grid.y_min) / grid.dy();
        if (fx < -1e-9 || fx > grid.nx + 1e-9 || fy < -1e-9 || fy > grid.ny + 1e-9)
            throw std::domain_error("GridField::interpolate: point outside grid");
        const int i = std::clamp(static_cast<int>(fx), 0, grid.nx - 1);
        const int j = std::clamp(static_cast<int>(fy), 0, grid.ny - 1);
        const double sx = std::clamp(fx - i, 0.0, 1.0);
        const double sy = std::clamp(fy - j, 0.0, 1.0);
        return (1 - sx) * (1 - sy) * at(i, j) + sx * (1 - sy) * at(i + 1, j) +
               (1 - sx) * sy * at(i, j + 1) + sx * sy * at(i + 1, j + 1);
    }
};

/// The planar lens, the intersection of the two balls of radius 3/2 centered
/// at (1,0) and (-1,0), rasterized as a node mask (node-in-region).
struct LensDomain {
    static bool inside(double x, double y) {
        const double r2 = 2.25;
        return (x - 1.0) * (x - 1.0) + y * y < r2 && (x + 1.0) * (x + 1.0) + y * y < r2;
    }

    static std::vector<std::uint8_t> mask(const PdeGrid& grid) {
        std::vector<std::uint8_t> m(grid.nodes(), 0);
        for (int i = 0; i <= grid.nx; ++i)
            for (int j = 0; j <= grid.ny; ++j)
                m[grid.idx(i, j)] = inside(grid.x(i), grid.y(j)) ? 1 : 0;
        return m;
    }
};

using ScalarField2 = std::function<double(double, double)>;
using ScalarField3 = std::function<double(double, double, double)>;

struct CauchyProblem {
    CoefficientSet coeffs{};
    PdeGrid grid{};
    double horizon = 1.0;
    double dt = 0.0;  // 0 requests the validated auto step
    ScalarField2 initial;
    ScalarField3 boundary;          // defaults to 0
    ScalarField3 source;            // optional forcing
    std::vector<std::uint8_t> mask; // optional domain mask on nodes
    std::vector<double> snapshot_times;
    int threads = 1;
    /// Optional per-step probe, called after each completed step.
    std::function<void(std::int64_t, double, const std::vector<double>&)> observer;
};

struct CauchySolution {
    PdeGrid grid;
    double dt = 0.0;
    std::int64_t steps = 0;
    std::vector<GridField> snapshots;
    GridField final_field;
};

namespace detail {

struct StencilCoeffs {
    std::vector<double> ca, cbp, cx;  // per x-node: dt a/dx^2, dt b/(2dx), dt x/dy
};

inline void step_rows(const std::vector<double>& u, std::vector<double>& un,
                      const PdeGrid& g, const StencilCoeffs& sc, int i_lo, int i_hi) {
    const int nyn = g.ny + 1;
    for (int i = i_lo; i < i_hi; ++i) {
        const double ca = sc.ca[i], cbp = sc.cbp[i], cx = sc.cx[i];
        const double* row = &u[g.idx(i, 0)];
        const double* rm = &u[g.idx(i - 1, 0)];
        const double* rp = &u[g.idx(i + 1, 0)];
        double* out = &un[g.idx(i, 0)];
        if (cx >= 0.0) {
            for (int j = 1; j < nyn - 1; ++j)
                out[j] = row[j] + ca * (rp[j] - 2.0 * row[j] + rm[j]) +
                         cbp * (rp[j] - rm[j]) - cx * (row[j] - row[j - 1]);
        } else {
            for (int j = 1; j < nyn - 1; ++j)
                out[j] = row[j] + ca * (rp[j] - 2.0 * row[j] + rm[j]) +
                         cbp * (rp[j] - rm[j]) - cx * (row[j + 1] - row[j]);
        }
    }
}

}  // namespace detail

/// Largest monotone time step for the given coefficients and grid
/// (with a 10% margin).
inline double stable_dt(const CoefficientSet& coeffs, const PdeGrid& grid) {
    double worst = 0.0;
    for (int i = 0; i <= grid.nx; ++i) {
        const double x = grid.x(i);
        const double a = coeffs.a(x), b = coeffs.b(x);
        worst = std::max(worst, 2.0 * a / (grid.dx() * grid.dx()) +
                                    std::fabs(b) / grid.dx() + std::fabs(x) / grid.dy());
    }
    return 0.9 / worst;
}

/// Explicit time-marched solution of the Cauchy (or masked Dirichlet)
/// problem. Validates the step bound and the cell Peclet condition before
/// stepping; per-step row updates may be split across threads without
/// changing the result.
inline CauchySolution solve_cauchy(const CauchyProblem& prob) {
    const PdeGrid& g = prob.grid;
    if (!prob.initial) throw std::invalid_argument("solve_cauchy: initial data required");
    if (!(prob.horizon > 0.0)) throw std::invalid_argument("solve_cauchy: horizon must be positive");
    if (!prob.mask.empty() && prob.mask.size() != g.nodes())
        throw std::invalid_argument("solve_cauchy: mask/grid mismatch");

    for (int i = 0; i <= g.nx; ++i) {
        const double x = g.x(i);
        const double a = prob.coeffs.a(x), b = prob.coeffs.b(x);
        if (std::fabs(b) * g.dx() > 2.0 * a + 1e-15)
            throw std::invalid_argument("solve_cauchy: cell Peclet condition violated, refine dx");
    }
    const double dt_max = stable_dt(prob.coeffs, g);
    double dt = prob.dt > 0.0 ? prob.dt : dt_max;
    if (dt > dt_max * (1.0 + 1e-12))
        throw std::invalid_argument("solve_cauchy: time step violates the stability bound");
    const std::int64_t nsteps = static_cast<std::int64_t>(std::ceil(prob.horizon / dt - 1e-12));
    dt = prob.horizon / static_cast<double>(nsteps);

    std::vector<double> u(g.nodes()), un(g.nodes());
    for (int i = 0; i <= g.nx; ++i)
        for (int j = 0; j <= g.ny; ++j) u[g.idx(i, j)] = prob.initial(g.x(i), g.y(j));
    const auto bdry = [&](double x, double y, double t) {
        return prob.boundary ? prob.boundary(x, y, t) : 0.0;
    };
    if (!prob.mask.empty()) {
        for (int i = 0; i <= g.nx; ++i)
            for (int j = 0; j <= g.ny; ++j)
                if (!prob.mask[g.idx(i, j)]) u[g.idx(i, j)] = bdry(g.x(i), g.y(j), 0.0);
    }

    detail::StencilCoeffs sc;
    sc.ca.resize(g.nx + 1);
    sc.cbp.resize(g.nx + 1);
    sc.cx.resize(g.nx + 1);
    for (int i = 0; i <= g.nx; ++i) {
        const double x = g.x(i);
        sc.ca[i] = dt * prob.coeffs.a(x) / (g.dx() * g.dx());
        sc.cbp[i] = dt * prob.coeffs.b(x) / (2.0 * g.dx());
        sc.cx[i] = dt * x / g.dy();
    }

    CauchySolution sol;
    sol.grid = g;
    sol.dt = dt;
    sol.steps = nsteps;
    std::size_t next_snap = 0;
    std::vector<double> snap_times = prob.snapshot_times;
    std::sort(snap_times.begin(), snap_times.end());

    // Row-splitting pays for itself only on large grids; small solves run
    // the plain loop (callers parallelize across independent solves).
    const int nthreads = g.nodes() >= 50000 ? std::max(1, prob.threads) : 1;
    for (std::int64_t n = 0; n < nsteps; ++n) {
        const double t_now = n * dt;
        const double t_next = (n + 1) * dt;
        if (nthreads <= 1 || g.nx < 8) {
            detail::step_rows(u, un, g, sc, 1, g.nx);
        } else {
            std::vector<std::thread> workers;
            const int chunk = (g.nx - 1 + nthreads - 1) / nthreads;
            for (int w = 0; w < nthreads; ++w) {
                const int lo = 1 + w * chunk;
                const int hi = std::min(g.nx, lo + chunk);
                if (lo >= hi) break;
                workers.emplace_back([&, lo, hi] { detail::step_rows(u, un, g, sc, lo, hi); });
            }
            for (auto& th : workers) th.join();
        }
        if (prob.source) {
            for (int i = 1; i < g.nx; ++i)
                for (int j = 1; j < g.ny; ++j)
                    un[g.idx(i, j)] += dt * prob.source(g.x(i), g.y(j), t_now);
        }
        for (int i = 0; i <= g.nx; ++i) {
            un[g.idx(i, 0)] = bdry(g.x(i), g.y_min, t_next);
            un[g.idx(i, g.ny)] = bdry(g.x(i), g.y_max, t_next);
        }
        for (int j = 0; j <= g.ny; ++j) {
            un[g.idx(0, j)] = bdry(g.x_min, g.y(j), t_next);
            un[g.idx(g.nx, j)] = bdry(g.x_max, g.y(j), t_next);
        }
        if (!prob.mask.empty()) {
            for (int i = 0; i <= g.nx; ++i)
                for (int j = 0; j <= g.ny; ++j)
                    if (!prob.mask[g.idx(i, j)]) un[g.idx(i, j)] = bdry(g.x(i), g.y(j), t_next);
        }
        u.swap(un);
        if (prob.observer) prob.observer(n + 1, t_next, u);
        while (next_snap < snap_times.size() && t_next >= snap_times[next_snap] - 1e-12) {
            sol.snapshots.push_back({g, t_next, u});
            ++next_snap;
        }
    }
    sol.final_field = {g, prob.horizon, std::move(u)};
    return sol;
}

/// View of a grid solution in the momentum chart: f(p, y) = u(phi(p), y),
/// the inverse of the change of variables behind the transformed equation.
struct MomentumField {
    const GridField* field;

    double operator()(double p, double y) const {
        return field->interpolate(to_velocity(p), y);
    }
};

inline MomentumField to_momentum_field(const GridField& u) { return {&u}; }

/// Dirichlet problem on the lens cylinder: zero data on the lateral
/// (staircase) boundary, initial data on the lens slice. Requires the
/// bounded coefficient pair so the equation is uniformly parabolic.
inline CauchySolution solve_dirichlet_lens(const ScalarField2& initial,
                                           const ScalarField3& source,
                                           const PdeGrid& grid, double horizon,
                                           std::vector<double> snapshot_times = {},
                                           int threads = 1, double dt = 0.0) {
    CauchyProblem prob;
    prob.coeffs = {CoefficientVariant::Modified};
    prob.grid = grid;
    prob.horizon = horizon;
    prob.dt = dt;
    prob.initial = initial;
    prob.source = source;
    prob.mask = LensDomain::mask(grid);
    prob.snapshot_times = std::move(snapshot_times);
    prob.threads = threads;
    if (!LensDomain::inside(0.0, 0.0))
        throw std::logic_error("solve_dirichlet_lens: lens must contain the origin");
    return solve_cauchy(prob);
}

struct GreenParams {
    double dx = 0.0125;
    double dy = 0.0025;
    double x_extent = 0.9;   // free-space box half-width, grid shared with the lens
    double y_extent = 1.2;
    std::vector<double> t_eval{0.05, 0.1, 0.2, 0.4};
    int threads = 1;
};

struct GreenResult {
    std::vector<double> t;
    std::vector<double> green;        // Richardson-extrapolated G(0,0,t;0,0,0)
    std::vector<double> gamma;        // free-space estimate at the same arguments
    std::vector<double> green_raw[2]; // per-width values, narrow first
    std::vector<double> gamma_raw[2];
    double dt = 0.0;
};

namespace detail {

inline ScalarField2 delta_approx(double eps_x, double eps_y, double x0 = 0.0, double y0 = 0.0) {
    const double norm = 1.0 / (2.0 * std::numbers::pi * eps_x * eps_y);
    return [=](double x, double y) {
        const double a = (x - x0) / eps_x, b = (y - y0) / eps_y;
        return norm * std::exp(-0.5 * (a * a + b * b));
    };
}

inline std::vector<double> center_values(const CauchySolution& sol) {
    std::vector<double> out;
    out.reserve(sol.snapshots.size());
    for (const auto& s : sol.snapshots) out.push_back(s.interpolate(0.0, 0.0));
    return out;
}

}  // namespace detail

/// Green function of the lens Dirichlet problem and the free-space
/// fundamental-solution estimate at the origin, G(0,0,t;0,0,0) and
/// Gamma(0,0,t;0,0,0), approximated by Cauchy solves from normalized narrow
/// Gaussians of widths (2 dx, 2 dy) and (4 dx, 4 dy), Richardson-
/// extrapolated in the width. Both run on one shared grid with one step
/// size, so the discrete domination Gamma >= G holds exactly per width.
inline GreenResult green_values(const GreenParams& gp) {
    GreenResult out;
    out.t = gp.t_eval;
    std::sort(out.t.begin(), out.t.end());
    const double horizon = out.t.back();

    PdeGrid grid;
    grid.x_min = -gp.x_extent;
    grid.x_max = gp.x_extent;
    grid.y_min = -gp.y_extent;
    grid.y_max = gp.y_extent;
    grid.nx = static_cast<int>(std::lround(2.0 * gp.x_extent / gp.dx));
    grid.ny = static_cast<int>(std::lround(2.0 * gp.y_extent / gp.dy));

    const CoefficientSet orig{CoefficientVariant::Original};
    const CoefficientSet modif{CoefficientVariant::Modified};
    const double dt = std::min(stable_dt(orig, grid), stable_dt(modif, grid));
    if (out.t.front() < 10.0 * dt)
        throw std::invalid_argument("green_values: smallest t is below the resolvable scale");
    out.dt = dt;

    const auto mask = LensDomain::mask(grid);
    for (int w = 0; w < 2; ++w) {
        const double f = w == 0 ? 2.0 : 4.0;
        CauchyProblem free_prob;
        free_prob.coeffs = orig;
        free_prob.grid = grid;
        free_prob.horizon = horizon;
        free_prob.dt = dt;
        free_prob.initial = detail::delta_approx(f * gp.dx, f * gp.dy);
        free_prob.snapshot_times = out.t;
        free_prob.threads = gp.threads;
        CauchyProblem lens_prob = free_prob;
        lens_prob.coeffs = modif;
        lens_prob.mask = mask;
        out.gamma_raw[w] = detail::center_values(solve_cauchy(free_prob));
        out.green_raw[w] = detail::center_values(solve_cauchy(lens_prob));
    }
    out.green.resize(out.t.size());
    out.gamma.resize(out.t.size());
    for (std::size_t k = 0; k < out.t.size(); ++k) {
        out.green[k] = (4.0 * out.green_raw[0][k] - out.green_raw[1][k]) / 3.0;
        out.gamma[k] = (4.0 * out.gamma_raw[0][k] - out.gamma_raw[1][k]) / 3.0;
    }
    return out;
}

/// Convenience wrapper for a single time.
inline double green_value(double t, const GreenParams& base = {}) {
    if (!(t > 0.0)) throw std::invalid_argument("green_value: t must be positive");
    GreenParams gp = base;
    gp.t_eval = {t};
    return green_values(gp).green[0];
}

/// Flux-form solver for the momentum diffusion d_s w = d_p(sqrt(p^2+1) d_p w)
/// on a p-interval with reflecting (no-flux) ends. The update telescopes, so
/// the total mass is conserved to rounding.
struct FluxDiffusionResult {
    std::vector<double> p;
    std::vector<double> w;
    double mass_drift_per_step = 0.0;
};

inline FluxDiffusionResult solve_momentum_flux(const std::function<double(double)>& w0,
                                               double p_extent, int np, double horizon) {
    const double dp = 2.0 * p_extent / np;
    std::vector<double> p(np + 1), w(np + 1), wn(np + 1);
    for (int i = 0; i <= np; ++i) {
        p[i] = -p_extent + i * dp;
        w[i] = w0(p[i]);
    }
    std::vector<double> e_half(np);  // sqrt(p^2+1) at midpoints
    double emax = 0.0;
    for (int i = 0; i < np; ++i) {
        e_half[i] = energy(0.5 * (p[i] + p[i + 1]));
        emax = std::max(emax, e_half[i]);
    }
    const double dt = 0.45 * dp * dp / emax;
    const std::int64_t nsteps = static_cast<std::int64_t>(std::ceil(horizon / dt));
    const double h = horizon / static_cast<double>(nsteps);
    double mass0 = 0.0;
    for (int i = 0; i <= np; ++i) mass0 += w[i] * dp;
    double worst_drift = 0.0;
    for (std::int64_t n = 0; n < nsteps; ++n) {
        for (int i = 0; i <= np; ++i) {
            const double flux_r = (i < np) ? e_half[i] * (w[i + 1] - w[i]) / dp : 0.0;
            const double flux_l = (i > 0) ? e_half[i - 1] * (w[i] - w[i - 1]) / dp : 0.0;
            wn[i] = w[i] + h * (flux_r - flux_l) / dp;
        }
        w.swap(wn);
        double mass = 0.0;
        for (int i = 0; i <= np; ++i) mass += w[i] * dp;
        worst_drift = std::max(worst_drift, std::fabs(mass - mass0));
        mass0 = mass;
    }
    return {std::move(p), std::move(w), worst_drift};
}

}  // namespace relkin
