#pragma once

// Hormander vector fields of the d-dimensional kinetic operator
// (d = 1, 2, 3): the diffusion fields X_1..X_d with X^2 = I + p (x) p,
// the drift field Y, Lie brackets, the rank condition, the first-order
// correction putting the operator in sum-of-squares form, and numerical
// checks of Lorentz invariance of X and Y.
//
// Points live in R^{2d+1}, ordered (p_1..p_d, y_1..y_d, t).

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "relkin/geometry.hpp"

namespace relkin {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A smooth vector field on R^n given by its coefficient map.
struct VectorField {
    int dim = 0;  // n = 2d+1
    std::function<Vec(const Vec&)> coeff;

    Vec operator()(const Vec& z) const { return coeff(z); }
};

/// q(p) = p / sqrt(1 + sqrt(|p|^2 + 1)); satisfies 1 + |q|^2 = sqrt(|p|^2+1).
inline Vec q_of_p(const Vec& p) {
    const double e = std::sqrt(p.squaredNorm() + 1.0);
    return p / std::sqrt(1.0 + e);
}

/// dq_j/dp_i, exact.
inline Mat q_jacobian(const Vec& p) {
    const int d = static_cast<int>(p.size());
    const double e = std::sqrt(p.squaredNorm() + 1.0);
    const double alpha = 1.0 / std::sqrt(1.0 + e);
    // d(alpha)/dp_i = -p_i / (2 e (1+e)^{3/2})
    const Vec dalpha = -p / (2.0 * e * std::pow(1.0 + e, 1.5));
    Mat J(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            J(j, i) = alpha * (i == j ? 1.0 : 0.0) + p[j] * dalpha[i];
    return J;
}

/// The symmetric matrix X(p) = I_d + q (x) q whose columns are the
/// coefficients of X_1..X_d; satisfies X(p)^2 = I_d + p (x) p.
inline Mat build_x_matrix(const Vec& p) {
    const int d = static_cast<int>(p.size());
    const Vec q = q_of_p(p);
    return Mat::Identity(d, d) + q * q.transpose();
}

/// Exact inverse of I_d + q (x) q.
inline Mat x_matrix_inverse(const Vec& p) {
    const int d = static_cast<int>(p.size());
    const Vec q = q_of_p(p);
    return Mat::Identity(d, d) - (q * q.transpose()) / (1.0 + q.squaredNorm());
}

inline Vec p_part(const Vec& z, int d) { return z.head(d); }

/// Diffusion field X_j as a VectorField on R^{2d+1}.
inline VectorField field_x(int d, int j) {
    if (j < 0 || j >= d) throw std::invalid_argument("field_x: bad index");
    return {2 * d + 1, [d, j](const Vec& z) {
                Vec c = Vec::Zero(2 * d + 1);
                c.head(d) = build_x_matrix(p_part(z, d)).col(j);
                return c;
            }};
}

/// Drift field Y = p . grad_y + sqrt(|p|^2+1) d/dt.
inline VectorField field_y(int d) {
    return {2 * d + 1, [d](const Vec& z) {
                Vec c = Vec::Zero(2 * d + 1);
                const Vec p = p_part(z, d);
                c.segment(d, d) = p;
                c[2 * d] = std::sqrt(p.squaredNorm() + 1.0);
                return c;
            }};
}

/// The non-invariant drift of the unweighted form of the operator (1-D).
inline VectorField field_y_tilde() {
    return {3, [](const Vec& z) {
                const double v = to_velocity(z[0]);
                return Vec{{v, v, 1.0}};
            }};
}

/// The diffusion field of the unweighted form of the operator (1-D).
inline VectorField field_x_tilde() {
    return {3, [](const Vec& z) {
                return Vec{{std::pow(z[0] * z[0] + 1.0, 0.25), 0.0, 0.0}};
            }};
}

/// Closed-form [X, Y] for d = 1: sqrt(p^2+1) d/dy + p d/dt.
inline Vec bracket_xy_1d(const Vec& z) {
    return Vec{{0.0, energy(z[0]), z[0]}};
}

/// Lie bracket [V, W] at z by central finite differences of the coefficient
/// maps; the default step is h = 1e-5 * max(1, |z|).
inline Vec lie_bracket(const VectorField& V, const VectorField& W, const Vec& z,
                       double h = 0.0) {
    if (V.dim != W.dim || V.dim != z.size())
        throw std::invalid_argument("lie_bracket: dimension mismatch");
    const int n = V.dim;
    if (h <= 0.0) h = 1e-5 * std::max(1.0, z.norm());
    const Vec v = V(z), w = W(z);
    Vec out = Vec::Zero(n);
    for (int j = 0; j < n; ++j) {
        Vec zp = z, zm = z;
        zp[j] += h;
        zm[j] -= h;
        const Vec dW = (W(zp) - W(zm)) / (2.0 * h);
        const Vec dV = (V(zp) - V(zm)) / (2.0 * h);
        out += v[j] * dW - w[j] * dV;
    }
    return out;
}

/// The (2d+1)x(2d+1) matrix whose columns are X_1..X_d, [X_1,Y]..[X_d,Y], Y.
/// Assembled from the closed forms; det M = sqrt(|p|^2 + 1).
inline Mat bracket_matrix(const Vec& z, int d) {
    const Vec p = p_part(z, d);
    const Mat X = build_x_matrix(p);
    const int n = 2 * d + 1;
    Mat M = Mat::Zero(n, n);
    M.block(0, 0, d, d) = X;
    M.block(d, d, d, d) = X;  // [X_j, Y] y-components
    for (int j = 0; j < d; ++j) M(2 * d, d + j) = p[j];
    M.block(d, 2 * d, d, 1) = p;
    M(2 * d, 2 * d) = std::sqrt(p.squaredNorm() + 1.0);
    return M;
}

struct RankResult {
    int rank = 0;
    double det = 0.0;
};

/// Numerical rank (singular values above 1e-8 * max) and determinant of the
/// bracket matrix at z.
inline RankResult hormander_rank(const Vec& z, int d) {
    if (d < 1 || d > 3) throw std::invalid_argument("hormander_rank: d must be 1..3");
    const Mat M = bracket_matrix(z, d);
    Eigen::JacobiSVD<Mat> svd(M);
    const auto& s = svd.singularValues();
    const double tol = 1e-8 * s[0];
    int rank = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s[i] > tol) ++rank;
    return {rank, M.determinant()};
}

/// First-order corrections of the sum-of-squares form: returns the vector
/// c~ with c~_j = sum_{i,k} (delta_ik + q_i q_k) d(q_j q_k)/dp_i and
/// c = (d p - c~)^T (I + q (x) q)^{-1}.
struct DriftCorrection {
    Vec c_tilde;
    Vec c;
};

inline DriftCorrection drift_correction(const Vec& p) {
    const int d = static_cast<int>(p.size());
    const Vec q = q_of_p(p);
    const Mat dq = q_jacobian(p);  // dq(j,i) = dq_j/dp_i
    const Mat X = build_x_matrix(p);
    Vec ct = Vec::Zero(d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k)
                ct[j] += X(i, k) * (q[k] * dq(j, i) + q[j] * dq(k, i));
    const Vec c = x_matrix_inverse(p).transpose() * (d * p - ct);
    return {ct, c};
}

/// Polynomial-times-Gaussian test function with exact derivatives:
/// f(z) = (1 + a . z) exp(-|z - mu|^2).
struct PolyGaussian {
    Vec mu;
    Vec a;

    double value(const Vec& z) const {
        return (1.0 + a.dot(z)) * std::exp(-(z - mu).squaredNorm());
    }
    Vec gradient(const Vec& z) const {
        const double g = std::exp(-(z - mu).squaredNorm());
        const double poly = 1.0 + a.dot(z);
        return g * (a - 2.0 * poly * (z - mu));
    }
    Mat hessian(const Vec& z) const {
        const int n = static_cast<int>(z.size());
        const double g = std::exp(-(z - mu).squaredNorm());
        const double poly = 1.0 + a.dot(z);
        const Vec w = z - mu;
        Mat H(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                H(i, j) = g * (-2.0 * a[j] * w[i] - 2.0 * a[i] * w[j] +
                               4.0 * poly * w[i] * w[j] - 2.0 * poly * (i == j ? 1.0 : 0.0));
        return H;
    }
};

/// The operator in non-divergence form,
/// Lf = Tr((I + p(x)p) Hess_p f) + d p . grad_p f - Y f, evaluated exactly.
inline double apply_operator(const PolyGaussian& f, const Vec& z, int d) {
    const Vec p = p_part(z, d);
    const Mat A = Mat::Identity(d, d) + p * p.transpose();
    const Mat H = f.hessian(z);
    const Vec g = f.gradient(z);
    double out = (A * H.topLeftCorner(d, d)).trace();
    out += d * p.dot(g.head(d));
    out -= p.dot(g.segment(d, d));
    out -= std::sqrt(p.squaredNorm() + 1.0) * g[2 * d];
    return out;
}

/// The same operator assembled as sum_j X_j^2 + sum_k c_k X_k - Y from the
/// field coefficients and the exact drift correction.
inline double apply_hormander_form(const PolyGaussian& f, const Vec& z, int d) {
    const Vec p = p_part(z, d);
    const Mat X = build_x_matrix(p);
    const Mat H = f.hessian(z);
    const Vec g = f.gradient(z);
    const DriftCorrection dc = drift_correction(p);
    // sum_j X_j^2 f = Tr(X^2 Hess_p f) + c~ . grad_p f
    double out = (X * X * H.topLeftCorner(d, d)).trace() + dc.c_tilde.dot(g.head(d));
    out += (X * dc.c).dot(g.head(d));  // sum_k c_k X_k f
    out -= p.dot(g.segment(d, d));
    out -= std::sqrt(p.squaredNorm() + 1.0) * g[2 * d];
    return out;
}

enum class FieldKind { X, Y, YTilde };

/// Residual |V(f o Lambda)(z) - (Vf)(Lambda z)| for the 1-D fields under the
/// boost with frame velocity beta, using exact derivatives throughout.
/// Vanishes identically for X and Y; stays away from zero for YTilde.
inline double invariance_residual(FieldKind kind, double beta,
                                  const PolyGaussian& f, const Vec& z) {
    if (!(std::fabs(beta) < 1.0))
        throw std::domain_error("invariance_residual: |beta| must be < 1");
    const VectorField V = kind == FieldKind::X    ? field_x(1, 0)
                          : kind == FieldKind::Y  ? field_y(1)
                                                  : field_y_tilde();
    const double gb = lorentz_gamma(beta);
    const double e = energy(z[0]);
    const PhasePoint lz = boost_point(beta, {z[0], z[1], z[2]});
    const Vec zi{{lz.p, lz.y, lz.t}};
    // Jacobian J(j,i) = d Lambda_j / d z_i of the boosted coordinates.
    Mat J = Mat::Zero(3, 3);
    J(0, 0) = gb * (1.0 - beta * z[0] / e);
    J(1, 1) = gb;
    J(1, 2) = -gb * beta;
    J(2, 1) = -gb * beta;
    J(2, 2) = gb;
    const Vec grad_pullback = J.transpose() * f.gradient(zi);
    const double lhs = V(z).dot(grad_pullback);
    const double rhs = V(zi).dot(f.gradient(zi));
    return std::fabs(lhs - rhs);
}

}  // namespace relkin
