#pragma once
#include <pricer/network_model.hpp>

#include <cmath>

namespace pricer {

/// MSE upper bound split into its topology and privacy parts.
struct MseBreakdown
{
    double tiv_bound = 0.0;  // R^2 sigma_tv^2
    double piv = 0.0;        // sigma_pr^2
    double total = 0.0;
};

/// |sum_j p_j p_ij a_ij - 1| per row; zero everywhere iff the PS estimate is unbiased.
inline Vector unbiasedness_residual(const NetworkModel& model, const Matrix& A)
{
    const auto n = model.size();
    Vector r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        CompensatedSum s;
        for (Eigen::Index j = 0; j < n; ++j) s += model.p(j) * model.P(i, j) * A(i, j);
        r(i) = std::abs(s.value() - 1.0);
    }
    return r;
}

inline bool is_unbiased(const NetworkModel& model, const Matrix& A, double tol = 1e-8)
{
    return unbiasedness_residual(model, A).maxCoeff() <= tol;
}

namespace detail {

// First two sums shared by the exact and relaxed topology variance. The
// triple sum is evaluated literally in (i, j, l) order.
inline void tv_common_terms(const NetworkModel& model, const Matrix& A, CompensatedSum& acc)
{
    const auto n = model.size();
    const auto& p = model.p;
    const auto& P = model.P;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double a = p(j) * (1.0 - p(j)) * P(i, j) * A(i, j);
            if (a == 0.0) continue;
            for (Eigen::Index l = 0; l < n; ++l) {
                acc += a * P(l, j) * A(l, j);
            }
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            acc += P(i, j) * p(j) * (1.0 - P(i, j)) * A(i, j) * A(i, j);
        }
    }
}

} // namespace detail

/// Topology-induced variance bound sigma_tv^2 (per unit data norm).
inline double sigma_tv_sq(const NetworkModel& model, const Matrix& A)
{
    const auto n = model.size();
    CompensatedSum acc;
    detail::tv_common_terms(model, A, acc);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index l = 0; l < n; ++l) {
            const double c = model.p(i) * model.p(l) * (model.E(i, l) - model.P(i, l) * model.P(l, i));
            acc += c * A(l, i) * A(i, l);
        }
    }
    return acc.value() / static_cast<double>(n * n);
}

/// Convex relaxation of sigma_tv^2: reciprocal cross products a_li a_il
/// replaced by a_il^2. Never smaller than sigma_tv_sq.
inline double sigma_tv_sq_bar(const NetworkModel& model, const Matrix& A)
{
    const auto n = model.size();
    CompensatedSum acc;
    detail::tv_common_terms(model, A, acc);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index l = 0; l < n; ++l) {
            const double c = model.p(i) * model.p(l) * (model.E(i, l) - model.P(i, l) * model.P(l, i));
            acc += c * A(i, l) * A(i, l);
        }
    }
    return acc.value() / static_cast<double>(n * n);
}

/// Privacy-induced variance. Exact, not a bound.
inline double sigma_pr_sq(const NetworkModel& model, double sigma, Eigen::Index d)
{
    const auto n = model.size();
    CompensatedSum acc;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) acc += model.p(j) * model.P(i, j);
    }
    return acc.value() * sigma * sigma * static_cast<double>(d) / static_cast<double>(n * n);
}

inline MseBreakdown mse_upper_bound(const NetworkModel& model, const Matrix& A, double sigma,
                                    Eigen::Index d, double R)
{
    MseBreakdown out;
    out.tiv_bound = R * R * sigma_tv_sq(model, A);
    out.piv = sigma_pr_sq(model, sigma, d);
    out.total = out.tiv_bound + out.piv;
    return out;
}

} // namespace pricer
