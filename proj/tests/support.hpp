#pragma once
#include <pricer/pricer.hpp>

#include <cmath>
#include <random>

namespace pricer::testing {

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double log_uniform(Rng& rng, double lo, double hi)
{
    return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

/// Random valid model: p_i in [0.1, 1), p_ij in [0.1, 1], reciprocity drawn
/// uniformly between independence and the upper joint-pmf limit.
inline NetworkModel random_model(Eigen::Index n, Rng& rng, bool independent = false)
{
    Vector p(n);
    for (Eigen::Index i = 0; i < n; ++i) p(i) = uniform(rng, 0.1, 1.0);
    Matrix P = Matrix::Ones(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) P(i, j) = uniform(rng, 0.1, 1.0);
        }
    }
    auto model = NetworkModel::with_independent_links(p, P);
    if (!independent) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double lo = P(i, j) * P(j, i);
                const double hi = std::min(P(i, j), P(j, i));
                model.E(i, j) = model.E(j, i) = uniform(rng, lo, hi);
            }
        }
    }
    return model;
}

/// Random budgets in the experiments' range: eps_ii = 1e3, off-diagonal
/// eps log-uniform on [0.1, 1e3], delta = 1e-3, R = 1.
inline PrivacySpec random_privacy(Eigen::Index n, Rng& rng)
{
    PrivacySpec spec = PrivacySpec::uniform(n, 1.0, 1e3, 1e-3);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) spec.eps(i, j) = log_uniform(rng, 0.1, 1e3);
        }
    }
    return spec;
}

/// Nonnegative random weights rescaled row by row to satisfy unbiasedness.
inline Matrix random_unbiased_weights(const NetworkModel& model, Rng& rng)
{
    const auto n = model.size();
    Matrix A(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            A(i, j) = uniform(rng, 0.0, 1.0);
            s += model.p(j) * model.P(i, j) * A(i, j);
        }
        A.row(i) /= s;
    }
    return A;
}

inline Matrix diagonal_start(const NetworkModel& model)
{
    Matrix A = Matrix::Zero(model.size(), model.size());
    for (Eigen::Index i = 0; i < model.size(); ++i) A(i, i) = 1.0 / model.p(i);
    return A;
}

} // namespace pricer::testing
