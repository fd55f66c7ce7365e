#pragma once

// Seeded Euler-Maruyama simulation of the classical Langevin process and of
// the relativistic finite-velocity processes, plus kernel density estimation
// of the terminal (P, Y) law, the probabilistic face of the fundamental
// solution.
//
// Momentum noise convention: the relativistic processes are integrated in
// the kinetic (post-point) reading, i.e. the Ito-equivalent form carries the
// noise-induced drift. With lab-time parametrization the step is
//     P += v(P) ds + sqrt(2) (P^2+1)^{1/4} dW,   Y += v(P) ds,
// whose ensemble density solves the transformed Kolmogorov equation handled
// by the PDE module. The proper-parameter three-component variant is the
// same process under the time change dt = sqrt(P^2+1) ds:
//     P += P ds + sqrt(2) sqrt(P^2+1) dW,  Y += P ds,  T += sqrt(P^2+1) ds.
// Zero-noise mode drops the stochastic contribution together with its
// induced drift, leaving the deterministic skeleton with constant momentum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "relkin/geometry.hpp"
#include "relkin/rng.hpp"

namespace relkin {

enum class ProcessKind { Classical, Relativistic2, Relativistic3 };

inline const char* process_name(ProcessKind k) {
    switch (k) {
        case ProcessKind::Classical: return "classical";
        case ProcessKind::Relativistic2: return "sde";
        case ProcessKind::Relativistic3: return "rsde";
    }
    return "?";
}

struct SdeConfig {
    ProcessKind kind = ProcessKind::Relativistic2;
    PhasePoint z0{};
    double horizon = 1.0;
    double step = 1e-3;
    std::int64_t replicas = 1;
    std::uint64_t seed = 0;
    bool zero_noise = false;
    int threads = 1;

    void validate() const {
        if (!(step > 0.0)) throw std::invalid_argument("SdeConfig: step must be positive");
        if (!(horizon > 0.0)) throw std::invalid_argument("SdeConfig: horizon must be positive");
        if (step > horizon) throw std::invalid_argument("SdeConfig: step must not exceed horizon");
        if (replicas < 1) throw std::invalid_argument("SdeConfig: replicas must be >= 1");
        if (threads < 1) throw std::invalid_argument("SdeConfig: threads must be >= 1");
    }
};

/// Terminal states of all replicas plus per-replica diagnostics gathered
/// while stepping. `aborted` marks replicas whose state left the finite
/// range; they stay in the record and are never silently dropped.
struct PathEnsemble {
    SdeConfig config;
    std::vector<double> p, y, t;
    std::vector<std::uint8_t> aborted;
    std::vector<std::uint8_t> cone_violation;
    std::int64_t aborted_count = 0;

    std::int64_t size() const { return static_cast<std::int64_t>(p.size()); }
};

struct LightConeReport {
    std::int64_t total = 0;
    std::int64_t violating = 0;
    std::int64_t aborted = 0;
    double fraction = 0.0;
};

namespace detail {

inline void simulate_range(const SdeConfig& cfg, std::int64_t lo, std::int64_t hi,
                           PathEnsemble& out) {
    const double ds = cfg.step;
    const double sq2ds = std::sqrt(2.0 * ds);
    const std::int64_t nsteps = static_cast<std::int64_t>(std::ceil(cfg.horizon / ds - 1e-12));
    const double noise_on = cfg.zero_noise ? 0.0 : 1.0;
    for (std::int64_t r = lo; r < hi; ++r) {
        ReplicaRng rng(cfg.seed, static_cast<std::uint64_t>(r));
        double P = cfg.z0.p, Y = cfg.z0.y, T = cfg.z0.t;
        double s = 0.0;
        bool aborted = false, violated = false;
        for (std::int64_t n = 0; n < nsteps; ++n) {
            const double h = std::min(ds, cfg.horizon - s);
            const double sqh = (h == ds) ? sq2ds : std::sqrt(2.0 * h);
            const double xi = noise_on * rng.next_normal();
            double dY = 0.0, dT = h, cone = h;
            switch (cfg.kind) {
                case ProcessKind::Classical:
                    dY = P * h;
                    P += sqh * xi;
                    break;
                case ProcessKind::Relativistic2: {
                    const double v = to_velocity(P);
                    dY = v * h;
                    P += noise_on * v * h + sqh * std::pow(P * P + 1.0, 0.25) * xi;
                    break;
                }
                case ProcessKind::Relativistic3: {
                    const double e = energy(P);
                    dY = P * h;
                    dT = e * h;
                    cone = dT;
                    P += noise_on * P * h + sqh * e * xi;
                    break;
                }
            }
            Y += dY;
            T += dT;
            s += h;
            if (std::fabs(dY) >= cone) violated = true;
            if (!std::isfinite(P) || !std::isfinite(Y) || !std::isfinite(T)) {
                aborted = true;
                break;
            }
        }
        out.p[r] = P;
        out.y[r] = Y;
        out.t[r] = T;
        out.aborted[r] = aborted ? 1 : 0;
        out.cone_violation[r] = violated ? 1 : 0;
    }
}

}  // namespace detail

/// Euler-Maruyama path ensemble; deterministic given (config, seed) and
/// independent of the thread count.
inline PathEnsemble simulate(const SdeConfig& cfg) {
    cfg.validate();
    PathEnsemble out;
    out.config = cfg;
    const std::int64_t n = cfg.replicas;
    out.p.resize(n);
    out.y.resize(n);
    out.t.resize(n);
    out.aborted.assign(n, 0);
    out.cone_violation.assign(n, 0);

    const int nthreads = static_cast<int>(std::min<std::int64_t>(cfg.threads, n));
    if (nthreads <= 1) {
        detail::simulate_range(cfg, 0, n, out);
    } else {
        std::vector<std::thread> workers;
        const std::int64_t chunk = (n + nthreads - 1) / nthreads;
        for (int w = 0; w < nthreads; ++w) {
            const std::int64_t lo = w * chunk;
            const std::int64_t hi = std::min<std::int64_t>(lo + chunk, n);
            if (lo >= hi) break;
            workers.emplace_back([&cfg, lo, hi, &out] { detail::simulate_range(cfg, lo, hi, out); });
        }
        for (auto& t : workers) t.join();
    }
    for (std::int64_t r = 0; r < n; ++r) out.aborted_count += out.aborted[r];
    return out;
}

/// Fraction of replicas with a pathwise light-cone violation
/// (|dY| >= dT for the three-component process, |dY| >= ds otherwise).
inline LightConeReport light_cone_report(const PathEnsemble& e) {
    LightConeReport rep;
    rep.total = e.size();
    for (std::int64_t r = 0; r < rep.total; ++r) {
        rep.violating += e.cone_violation[r];
        rep.aborted += e.aborted[r];
    }
    rep.fraction = rep.total ? static_cast<double>(rep.violating) / rep.total : 0.0;
    return rep;
}

struct DensityGrid {
    double p_min = -1.0, p_max = 1.0;
    double y_min = -1.0, y_max = 1.0;
    int np = 50, ny = 50;

    double dp() const { return (p_max - p_min) / np; }
    double dy() const { return (y_max - y_min) / ny; }
    double cell_p(int i) const { return p_min + (i + 0.5) * dp(); }
    double cell_y(int j) const { return y_min + (j + 0.5) * dy(); }
};

struct Bandwidth {
    double hp = 0.0;  // 0 requests the Scott rule
    double hy = 0.0;
};

struct DensityEstimate {
    DensityGrid grid;
    double hp = 0.0, hy = 0.0;
    std::int64_t replicas = 0;
    std::vector<double> values;  // row-major, [i * ny + j]

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * grid.ny + j]; }
    double total_mass() const {
        double m = 0.0;
        for (double v : values) m += v;
        return m * grid.dp() * grid.dy();
    }
};

namespace detail {
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

inline double sample_sd(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / std::max<std::size_t>(1, v.size() - 1));
}
}  // namespace detail

/// Gaussian-kernel estimate of the terminal (P, Y) density, cell-averaged:
/// the cell value is the exact kernel mass in the cell divided by the cell
/// area, so the grid mass never exceeds one. Accumulation runs in replica
/// order; the result is bitwise reproducible.
inline DensityEstimate estimate_density(const PathEnsemble& e, const DensityGrid& grid,
                                        Bandwidth bw = {}) {
    const std::int64_t n = e.size();
    if (n == 0) throw std::invalid_argument("estimate_density: empty ensemble");
    if (e.aborted_count == n) throw std::invalid_argument("estimate_density: all replicas aborted");

    DensityEstimate out;
    out.grid = grid;
    const double scott = std::pow(static_cast<double>(n - e.aborted_count), -1.0 / 6.0);
    out.hp = bw.hp > 0.0 ? bw.hp : std::max(1e-12, detail::sample_sd(e.p) * scott);
    out.hy = bw.hy > 0.0 ? bw.hy : std::max(1e-12, detail::sample_sd(e.y) * scott);
    out.values.assign(static_cast<std::size_t>(grid.np) * grid.ny, 0.0);

    const double dp = grid.dp(), dy = grid.dy();
    const double wp = 8.0 * out.hp, wy = 8.0 * out.hy;
    std::vector<double> wx(grid.np), wyv(grid.ny);
    std::int64_t used = 0;
    for (std::int64_t r = 0; r < n; ++r) {
        if (e.aborted[r]) continue;
        ++used;
        const double P = e.p[r], Y = e.y[r];
        const int i0 = std::max(0, static_cast<int>(std::floor((P - wp - grid.p_min) / dp)));
        const int i1 = std::min(grid.np - 1, static_cast<int>(std::floor((P + wp - grid.p_min) / dp)));
        const int j0 = std::max(0, static_cast<int>(std::floor((Y - wy - grid.y_min) / dy)));
        const int j1 = std::min(grid.ny - 1, static_cast<int>(std::floor((Y + wy - grid.y_min) / dy)));
        if (i0 > i1 || j0 > j1) continue;
        double prev = detail::std_normal_cdf((grid.p_min + i0 * dp - P) / out.hp);
        for (int i = i0; i <= i1; ++i) {
            const double next = detail::std_normal_cdf((grid.p_min + (i + 1) * dp - P) / out.hp);
            wx[i] = next - prev;
            prev = next;
        }
        prev = detail::std_normal_cdf((grid.y_min + j0 * dy - Y) / out.hy);
        for (int j = j0; j <= j1; ++j) {
            const double next = detail::std_normal_cdf((grid.y_min + (j + 1) * dy - Y) / out.hy);
            wyv[j] = next - prev;
            prev = next;
        }
        for (int i = i0; i <= i1; ++i) {
            double* row = &out.values[static_cast<std::size_t>(i) * grid.ny];
            const double wi = wx[i];
            for (int j = j0; j <= j1; ++j) row[j] += wi * wyv[j];
        }
    }
    const double norm = 1.0 / (static_cast<double>(used) * dp * dy);
    for (double& v : out.values) v *= norm;
    out.replicas = used;
    return out;
}

/// Pointwise Gaussian-kernel density value at (p, y) with its standard error.
struct PointDensity {
    double value = 0.0;
    double se = 0.0;
};

inline PointDensity kde_at(const PathEnsemble& e, double p, double y, Bandwidth bw = {}) {
    const std::int64_t n = e.size();
    if (n == 0) throw std::invalid_argument("kde_at: empty ensemble");
    const double scott = std::pow(static_cast<double>(n), -1.0 / 6.0);
    const double hp = bw.hp > 0.0 ? bw.hp : std::max(1e-12, detail::sample_sd(e.p) * scott);
    const double hy = bw.hy > 0.0 ? bw.hy : std::max(1e-12, detail::sample_sd(e.y) * scott);
    const double norm = 1.0 / (2.0 * std::numbers::pi * hp * hy);
    double sum = 0.0, sumsq = 0.0;
    std::int64_t used = 0;
    for (std::int64_t r = 0; r < n; ++r) {
        if (e.aborted[r]) continue;
        const double a = (p - e.p[r]) / hp;
        const double b = (y - e.y[r]) / hy;
        const double k = norm * std::exp(-0.5 * (a * a + b * b));
        sum += k;
        sumsq += k * k;
        ++used;
    }
    PointDensity out;
    out.value = sum / static_cast<double>(used);
    const double var = sumsq / used - out.value * out.value;
    out.se = std::sqrt(std::max(0.0, var) / static_cast<double>(used));
    return out;
}

}  // namespace relkin
