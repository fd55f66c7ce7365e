#pragma once

// Harnack-chain construction along admissible paths: the recursive cost
// splitting with threshold k0^2, cone membership checks for the path
// estimates, and an empirical estimate of the Harnack constant from solved
// nonnegative solutions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <thread>
#include <vector>

#include "relkin/control.hpp"
#include "relkin/geometry.hpp"
#include "relkin/pde.hpp"
#include "relkin/rng.hpp"

namespace relkin {

inline double default_k0() { return 2.0 * std::log(1.5); }

struct ChainSpec {
    double k0 = default_k0();
    double theta = 0.5;
    double c_h = std::numeric_limits<double>::quiet_NaN();  // unknown unless estimated

    void validate() const {
        if (!(k0 > 0.0)) throw std::invalid_argument("ChainSpec: k0 must be positive");
        if (!(theta > 0.0 && theta < 1.0))
            throw std::invalid_argument("ChainSpec: theta must be in (0,1)");
    }
};

struct SplitTimes {
    int k = 0;
    std::vector<double> sigma;  // sigma_1 .. sigma_{k+1}, with sigma_{k+1} = s
};

/// Recursive splitting of [0, s]: k counts the full k0^2 cost quanta spent,
/// sigma_j is the first time the running cost exceeds j k0^2 (capped at s).
inline SplitTimes split_times(const ControlFunction& omega, double s, double k0) {
    if (!(s > 0.0 && s <= omega.horizon() + 1e-12))
        throw std::invalid_argument("split_times: s outside (0, T]");
    if (!(k0 > 0.0)) throw std::invalid_argument("split_times: k0 must be positive");
    const double total = omega.cost(s);
    const double quantum = k0 * k0;
    SplitTimes out;
    out.k = total > quantum ? static_cast<int>(std::ceil(total / quantum - 1e-12)) - 1 : 0;
    for (int j = 1; j <= out.k; ++j) {
        // First crossing of j * quantum: invert the piecewise-linear cost.
        const double target = j * quantum;
        double acc = 0.0, sigma = s;
        for (std::size_t seg = 0; seg < omega.values.size(); ++seg) {
            const double lo = omega.breakpoints[seg];
            const double hi = std::min(omega.breakpoints[seg + 1], s);
            if (hi <= lo) break;
            const double rate = omega.values[seg] * omega.values[seg];
            const double seg_cost = rate * (hi - lo);
            if (acc + seg_cost > target && rate > 0.0) {
                sigma = lo + (target - acc) / rate;
                break;
            }
            acc += seg_cost;
        }
        out.sigma.push_back(std::min(sigma, s));
    }
    out.sigma.push_back(s);
    return out;
}

struct ConeCheckReport {
    bool passed = true;        // cone inequalities held on all asserted samples
    bool cost_gated = false;   // some samples exceeded the k0^2 budget and were skipped
    std::size_t asserted = 0;
    double worst_excess = 0.0; // largest inequality violation over asserted samples
    double first_violation_s = std::numeric_limits<double>::quiet_NaN();
};

/// Checks the path estimates in the start frame: for every sample with
/// s <= sqrt(2/3) theta^2 r^2 and running cost <= k0^2,
///   |p(s)| <= sqrt(s),  |y(s)| <= s^{3/2},  0 <= -t(s) <= theta^2 r^2.
/// Samples beyond the cost budget are gated, not asserted.
inline ConeCheckReport cone_check(const AdmissiblePath& path, double r, double theta,
                                  double k0 = default_k0()) {
    if (!(r > 0.0 && r < 0.5)) throw std::invalid_argument("cone_check: r must be in (0, 1/2)");
    if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument("cone_check: theta must be in (0,1)");
    const PhasePoint z0 = path.z.front();
    const double s_cap = std::sqrt(2.0 / 3.0) * theta * theta * r * r;
    const double budget = k0 * k0 + 1e-12;
    const double tol = 1e-9;
    ConeCheckReport rep;
    for (std::size_t i = 0; i < path.s.size(); ++i) {
        const double s = path.s[i];
        if (s <= 0.0) continue;
        if (s > s_cap + 1e-15) break;
        if (path.control.cost(s) > budget) {
            rep.cost_gated = true;
            break;
        }
        const PhasePoint w = lorentz_reduce(z0, path.z[i]);
        const double ex_p = std::fabs(w.p) - std::sqrt(s);
        const double ex_y = std::fabs(w.y) - s * std::sqrt(s);
        const double ex_t = std::max(w.t, -w.t - theta * theta * r * r);
        const double excess = std::max({ex_p, ex_y, ex_t});
        ++rep.asserted;
        if (excess > tol) {
            if (rep.passed) rep.first_violation_s = s;
            rep.passed = false;
        }
        rep.worst_excess = std::max(rep.worst_excess, excess);
    }
    return rep;
}

struct ChainLink {
    double sigma_from = 0.0, sigma_to = 0.0;
    PhasePoint from{}, to{};
    double segment_cost = 0.0;
    double r = 0.0;               // sqrt(t_j - t_{j+1}) / theta
    bool endpoint_in_cone = false;
};

struct HarnackChain {
    ChainSpec spec;
    std::vector<double> sigma;    // sigma_0 = 0 .. sigma_{k+1} = s
    std::vector<PhasePoint> points;
    std::vector<ChainLink> links;
    int k = 0;
    double total_cost = 0.0;
    double exponent = 0.0;        // Phi / k0^2 + 1
};

/// Builds the Harnack chain along the path of `omega` started at z0, after
/// validating the slab hypothesis t0 - t(s) <= theta^2 (t0 - T0) <= theta^4/4.
/// By default T0 is the deepest admissible slab floor, t0 - theta^2/4.
inline HarnackChain build_chain(const ControlFunction& omega, const PhasePoint& z0, double s,
                                const ChainSpec& spec,
                                double T0 = std::numeric_limits<double>::quiet_NaN(),
                                double ds = 1e-4) {
    spec.validate();
    const AdmissiblePath path = integrate_path(omega, z0, ds);
    const double th2 = spec.theta * spec.theta;
    if (std::isnan(T0)) T0 = z0.t - th2 / 4.0;
    const auto state_at = [&](double sq) {
        // The path sample grid is uniform per segment; nearest sample.
        auto it = std::lower_bound(path.s.begin(), path.s.end(), sq - 1e-12);
        const std::size_t i = std::min<std::size_t>(it - path.s.begin(), path.s.size() - 1);
        return path.z[i];
    };
    const PhasePoint zs = state_at(s);
    const double drop = z0.t - zs.t;
    if (!(drop <= th2 * (z0.t - T0) + 1e-12 && th2 * (z0.t - T0) <= th2 * th2 / 4.0 + 1e-12))
        throw std::invalid_argument(
            "build_chain: slab hypothesis violated (t0 - t(s) <= theta^2 (t0 - T0) <= theta^4/4)");

    const SplitTimes st = split_times(omega, s, spec.k0);
    HarnackChain chain;
    chain.spec = spec;
    chain.k = st.k;
    chain.total_cost = omega.cost(s);
    chain.exponent = chain.total_cost / (spec.k0 * spec.k0) + 1.0;
    chain.sigma.push_back(0.0);
    chain.points.push_back(z0);
    for (double sv : st.sigma) {
        chain.sigma.push_back(sv);
        chain.points.push_back(state_at(sv));
    }
    for (std::size_t j = 0; j + 1 < chain.points.size(); ++j) {
        ChainLink link;
        link.sigma_from = chain.sigma[j];
        link.sigma_to = chain.sigma[j + 1];
        link.from = chain.points[j];
        link.to = chain.points[j + 1];
        link.segment_cost = omega.cost(link.sigma_to) - omega.cost(link.sigma_from);
        const double tdrop = link.from.t - link.to.t;
        link.r = tdrop > 0.0 ? std::sqrt(tdrop) / spec.theta : 0.0;
        if (link.r > 0.0) {
            const Region cone_r = cone(link.from, link.r, spec.theta);
            link.endpoint_in_cone = contains(cone_r, link.to);
        }
        chain.links.push_back(link);
    }
    return chain;
}

struct HarnackEstimateParams {
    double r = 0.5;
    double theta = 0.5;
    int ensemble_size = 64;
    std::uint64_t seed = 0;
    double dx = 0.02;
    double dy = 0.003;
    int threads = 1;
};

struct HarnackEstimate {
    double c_h = 0.0;
    int used = 0;
    int discarded = 0;
};

/// Ratio sup_{S_{theta r}(0)} f / f(0,0,0) for one nonnegative solution,
/// grown from `initial` data on a box containing H_r(0) (the initial profile
/// is held on the lateral boundary so the evolved field solves the equation
/// on the whole box). Returns a negative value when f(0,0,0) < 1e-12.
inline double harnack_ratio(const ScalarField2& initial, double r, double theta,
                            double dx = 0.02, double dy = 0.003, int threads = 1) {
    if (!(r > 0.0 && r <= 0.5)) throw std::invalid_argument("harnack_ratio: r must be in (0, 1/2]");
    if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument("harnack_ratio: theta must be in (0,1)");

    const double r2 = r * r;
    const double tr = theta * r;
    PdeGrid grid;
    grid.x_max = std::min(0.95, to_velocity(r) + 0.15);
    grid.x_min = -grid.x_max;
    grid.y_max = 1.3 * r * r * r;
    grid.y_min = -grid.y_max;
    grid.nx = std::max(16, static_cast<int>(std::lround((grid.x_max - grid.x_min) / dx)));
    grid.ny = std::max(16, static_cast<int>(std::lround((grid.y_max - grid.y_min) / dy)));

    // Slab sample set: grid nodes inside S_{theta r}(0) in the momentum chart.
    std::vector<std::size_t> slab_nodes;
    for (int i = 0; i <= grid.nx; ++i) {
        if (!(std::fabs(grid.x(i)) < to_velocity(tr))) continue;
        for (int j = 0; j <= grid.ny; ++j)
            if (std::fabs(grid.y(j)) < tr * tr * tr) slab_nodes.push_back(grid.idx(i, j));
    }
    const double tau_lo = r2 - tr * tr;        // solver time of slab bottom
    const double tau_hi = r2 - tr * tr / 2.0;  // solver time of slab top

    CauchyProblem prob;
    prob.coeffs = {CoefficientVariant::Original};
    prob.grid = grid;
    prob.horizon = r2;
    prob.threads = threads;
    prob.initial = initial;
    prob.boundary = [initial](double x, double y, double) { return initial(x, y); };
    double slab_sup = 0.0;
    prob.observer = [&](std::int64_t, double tau, const std::vector<double>& u) {
        if (tau < tau_lo - 1e-12 || tau > tau_hi + 1e-12) return;
        for (std::size_t idx : slab_nodes) slab_sup = std::max(slab_sup, u[idx]);
    };
    const CauchySolution sol = solve_cauchy(prob);
    const double center = sol.final_field.interpolate(0.0, 0.0);
    if (center < 1e-12) return -1.0;
    return slab_sup / center;
}

/// Random nonnegative initial profile: a clipped trigonometric sum with
/// 8 seeded modes on the given box half-widths.
inline ScalarField2 random_bump(std::uint64_t seed, std::uint64_t member, double x_extent,
                                double y_extent) {
    ReplicaRng rng(seed, member);
    struct Mode {
        double amp, kx, ky, phase;
    };
    auto modes = std::make_shared<std::vector<Mode>>(8);
    for (auto& m : *modes) {
        m.amp = 2.0 * rng.next_uniform() - 1.0;
        m.kx = std::floor(4.0 * rng.next_uniform()) * std::numbers::pi / x_extent;
        m.ky = std::floor(4.0 * rng.next_uniform()) * std::numbers::pi / y_extent;
        m.phase = 2.0 * std::numbers::pi * rng.next_uniform();
    }
    return [modes](double x, double y) {
        double v = 0.0;
        for (const auto& m : *modes) v += m.amp * std::cos(m.kx * x + m.ky * y + m.phase);
        return std::max(0.0, v);
    };
}

/// Empirical lower bound for the Harnack constant: the ensemble maximum of
/// harnack_ratio over seeded random nonnegative data. Samples whose value at
/// the origin is below 1e-12 are discarded and counted. Members solve
/// independently across threads; the max reduction is order-independent.
inline HarnackEstimate estimate_harnack_constant(const HarnackEstimateParams& hp) {
    if (!(hp.r > 0.0 && hp.r <= 0.5))
        throw std::invalid_argument("estimate_harnack_constant: r must be in (0, 1/2]");
    if (!(hp.theta > 0.0 && hp.theta < 1.0))
        throw std::invalid_argument("estimate_harnack_constant: theta must be in (0,1)");
    const double x_extent = std::min(0.95, to_velocity(hp.r) + 0.15);
    const double y_extent = 1.3 * hp.r * hp.r * hp.r;
    std::vector<double> ratios(hp.ensemble_size);
    const auto run_range = [&](int lo, int hi) {
        for (int member = lo; member < hi; ++member)
            ratios[member] = harnack_ratio(
                random_bump(hp.seed, static_cast<std::uint64_t>(member), x_extent, y_extent),
                hp.r, hp.theta, hp.dx, hp.dy, 1);
    };
    const int nthreads = std::max(1, std::min(hp.threads, hp.ensemble_size));
    if (nthreads == 1) {
        run_range(0, hp.ensemble_size);
    } else {
        std::vector<std::thread> workers;
        const int chunk = (hp.ensemble_size + nthreads - 1) / nthreads;
        for (int w = 0; w < nthreads; ++w) {
            const int lo = w * chunk, hi = std::min(hp.ensemble_size, lo + chunk);
            if (lo >= hi) break;
            workers.emplace_back([&run_range, lo, hi] { run_range(lo, hi); });
        }
        for (auto& t : workers) t.join();
    }
    HarnackEstimate est;
    for (double ratio : ratios) {
        if (ratio < 0.0) {
            ++est.discarded;
            continue;
        }
        est.c_h = std::max(est.c_h, ratio);
        ++est.used;
    }
    return est;
}

}  // namespace relkin
