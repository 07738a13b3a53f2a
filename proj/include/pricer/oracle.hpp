#pragma once
#include <pricer/analysis.hpp>
#include <pricer/network_model.hpp>
#include <pricer/privacy.hpp>
#include <pricer/protocol.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pricer::oracle {

/// Exact second moments of the PS estimate error, by exhaustive
/// enumeration of every link outcome.
struct ExactMoments
{
    double exact_mse = 0.0;
    double exact_tiv = 0.0;
    double exact_piv = 0.0;
};

inline constexpr Eigen::Index max_exact_nodes = 4;

/// Enumerates all 2^n PS-link outcomes and all 4^(n(n-1)/2) joint outcomes
/// of the reciprocal node pairs. TIV is the probability-weighted squared
/// error of the noiseless estimate. Noise enters only through
/// E||(1/n) sum_ij tau_i tau_ji n_ji||^2 = (sigma^2 d / n^2) E[sum_ij tau_i tau_ji],
/// whose link expectation is enumerated as well.
inline ExactMoments exact_mse(const NetworkModel& model, const DataSet& data, const Matrix& A, double sigma)
{
    const auto n = model.size();
    if (n > max_exact_nodes) {
        throw std::invalid_argument("exact enumeration refused: n = " + std::to_string(n) +
                                    " exceeds " + std::to_string(max_exact_nodes));
    }
    require_valid(model);
    if (data.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("data size differs from n");
    const auto d = data.dim();
    const Vector truth = data.mean();

    struct Pair { Eigen::Index i, j; };
    std::vector<Pair> pairs;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) pairs.push_back({i, j});
    }
    const std::size_t num_pairs = pairs.size();
    std::size_t pair_states = 1;
    for (std::size_t k = 0; k < num_pairs; ++k) pair_states *= 4;
    const std::size_t ps_states = std::size_t{1} << n;

    CompensatedSum tiv;
    CompensatedSum link_mass;  // E[sum_ij tau_i tau_ji]
    CompensatedSum total_prob;
    Matrix tau = Matrix::Identity(n, n);
    std::vector<Vector> inflow(n, Vector::Zero(d));

    for (std::size_t s = 0; s < pair_states; ++s) {
        double p_pairs = 1.0;
        std::size_t code = s;
        for (const auto& pr : pairs) {
            const int st = static_cast<int>(code & 3u);
            code >>= 2;
            const double e = model.E(pr.i, pr.j);
            const double pij = model.P(pr.i, pr.j);
            const double pji = model.P(pr.j, pr.i);
            const bool a = (st & 1) != 0;  // tau_ij
            const bool b = (st & 2) != 0;  // tau_ji
            double prob = 0.0;
            if (a && b) prob = e;
            else if (a) prob = pij - e;
            else if (b) prob = pji - e;
            else prob = 1.0 - pij - pji + e;
            p_pairs *= prob;
            tau(pr.i, pr.j) = a ? 1.0 : 0.0;
            tau(pr.j, pr.i) = b ? 1.0 : 0.0;
        }
        if (p_pairs <= 0.0) continue;

        // inflow_i = sum_j tau_ji a_ji x_j; received_i = sum_j tau_ji
        std::vector<double> received(n, 0.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            inflow[i].setZero();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (tau(j, i) != 0.0) {
                    inflow[i] += A(j, i) * data.x[j];
                    received[i] += 1.0;
                }
            }
        }

        for (std::size_t m = 0; m < ps_states; ++m) {
            double prob = p_pairs;
            Vector est = Vector::Zero(d);
            double mass = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const bool up = ((m >> i) & 1u) != 0;
                prob *= up ? model.p(i) : 1.0 - model.p(i);
                if (up) {
                    est += inflow[i];
                    mass += received[i];
                }
            }
            if (prob <= 0.0) continue;
            est /= static_cast<double>(n);
            tiv += prob * (est - truth).squaredNorm();
            link_mass += prob * mass;
            total_prob += prob;
        }
    }

    ExactMoments out;
    out.exact_tiv = tiv.value();
    out.exact_piv = sigma * sigma * static_cast<double>(d) * link_mass.value() / static_cast<double>(n * n);
    out.exact_mse = out.exact_tiv + out.exact_piv;
    return out;
}

/// Worst case for the topology bound: every node holds the same vector of norm R.
inline DataSet collinear_data(Eigen::Index n, Eigen::Index d, double R)
{
    Vector v = Vector::Zero(d);
    v(0) = R;
    return DataSet{std::vector<Vector>(static_cast<std::size_t>(n), v)};
}

struct GridResult
{
    Matrix A;
    double sigma = 0.0;
    double objective = std::numeric_limits<double>::infinity();
    std::size_t feasible_points = 0;
};

inline constexpr int max_grid_resolution = 200;

/// Exhaustive search of R^2 sigma_tv^2(A) + sigma_pr^2(sigma) for n = 2.
///
/// Each row has one free weight once unbiasedness is imposed: the
/// off-diagonal weight runs over `resolution` evenly spaced points of
/// [0, 1/(p_j p_ij)] and the diagonal weight absorbs the rest. For a
/// fixed A the objective grows with sigma, so sigma is set to the
/// smallest value that satisfies every privacy constraint of A.
inline GridResult grid_search(const NetworkModel& model, const PrivacySpec& spec, Eigen::Index d, int resolution)
{
    if (model.size() != 2) throw std::invalid_argument("grid search requires n = 2");
    if (resolution < 2 || resolution > max_grid_resolution) {
        throw std::invalid_argument("grid resolution must lie in [2, 200]");
    }
    require_valid(model);

    // Candidate rows: (diagonal, off-diagonal) weights on the unbiasedness line.
    auto row_candidates = [&](Eigen::Index i) {
        const Eigen::Index o = 1 - i;
        const double c_self = model.p(i);  // p_i p_ii
        const double c_other = model.p(o) * model.P(i, o);
        std::vector<std::pair<double, double>> rows;
        if (c_other == 0.0) {
            rows.emplace_back(1.0 / c_self, 0.0);
            return rows;
        }
        const double top = 1.0 / c_other;
        for (int k = 0; k < resolution; ++k) {
            const double off = (k == resolution - 1) ? top : top * k / (resolution - 1);
            const double self = std::max(0.0, (1.0 - c_other * off) / c_self);
            rows.emplace_back(self, off);
        }
        return rows;
    };

    // Smallest sigma meeting  sqrt(2 ln(1.25/delta)) 2 a R / sigma <= eps  for every entry.
    auto sigma_for = [&](const Matrix& A) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < 2; ++i) {
            for (Eigen::Index j = 0; j < 2; ++j) {
                if (A(i, j) == 0.0) continue;
                if (spec.eps(i, j) == 0.0) return std::numeric_limits<double>::infinity();
                const double g = std::sqrt(2.0 * std::log(1.25 / spec.delta(i, j)));
                s = std::max(s, g * 2.0 * A(i, j) * spec.R / spec.eps(i, j));
            }
        }
        return s;
    };

    const auto rows0 = row_candidates(0);
    const auto rows1 = row_candidates(1);
    GridResult best;
    Matrix A = Matrix::Zero(2, 2);
    for (const auto& r0 : rows0) {
        for (const auto& r1 : rows1) {
            A(0, 0) = r0.first;
            A(0, 1) = r0.second;
            A(1, 1) = r1.first;
            A(1, 0) = r1.second;
            const double sigma = sigma_for(A);
            if (!std::isfinite(sigma)) continue;
            ++best.feasible_points;
            const double obj = spec.R * spec.R * sigma_tv_sq(model, A) + sigma_pr_sq(model, sigma, d);
            if (obj < best.objective) {
                best.objective = obj;
                best.A = A;
                best.sigma = sigma;
            }
        }
    }
    if (best.feasible_points == 0) throw std::runtime_error("grid search: no feasible grid point");
    return best;
}

} // namespace pricer::oracle
