#pragma once
#include <pricer/numeric.hpp>

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pricer {

/// Intermittent-connectivity topology.
///
/// `p(i)` is the success probability of the link from node i to the
/// parameter server, `P(i, j)` the success probability of the link i -> j,
/// and `E(i, j)` the expectation of the product of the two directed link
/// indicators between i and j (reciprocity). `P` and `E` carry ones on
/// the diagonal.
struct NetworkModel
{
    Vector p;
    Matrix P;
    Matrix E;

    Eigen::Index size() const noexcept { return p.size(); }

    /// Model with independent reciprocal links, E(i, j) = P(i, j) P(j, i).
    static NetworkModel with_independent_links(Vector p, Matrix P)
    {
        const auto n = p.size();
        if (P.rows() != n || P.cols() != n) {
            throw std::invalid_argument("P must be n x n with n = size of p");
        }
        Matrix E(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                E(i, j) = (i == j) ? 1.0 : P(i, j) * P(j, i);
            }
        }
        return NetworkModel{std::move(p), std::move(P), std::move(E)};
    }
};

struct Violation
{
    std::string message;
    Eigen::Index i = -1;
    Eigen::Index j = -1;
};

using ValidationReport = std::vector<Violation>;

namespace detail {

// Slack for inequality checks between probability products computed
// along different arithmetic paths.
inline constexpr double prob_slack = 1e-12;

inline std::string fmt_num(double v)
{
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

} // namespace detail

/// Checks every topology assumption. Indices in messages are 1-based.
inline ValidationReport validate_model(const NetworkModel& model)
{
    using detail::fmt_num;
    using detail::prob_slack;
    ValidationReport report;
    const auto n = model.size();
    if (n < 1) {
        report.push_back({"model has no nodes"});
        return report;
    }
    if (model.P.rows() != n || model.P.cols() != n ||
        model.E.rows() != n || model.E.cols() != n) {
        report.push_back({"P and E must be " + std::to_string(n) + "x" + std::to_string(n)});
        return report;
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto si = std::to_string(i + 1);
        const double pi = model.p(i);
        if (!(pi >= 0.0 && pi <= 1.0)) {
            report.push_back({"p_" + si + " = " + fmt_num(pi) + " outside [0,1]", i});
        } else if (pi == 0.0) {
            report.push_back({"p_" + si + " = 0 not allowed", i});
        }
        if (model.P(i, i) != 1.0) {
            report.push_back({"p_" + si + si + " = " + fmt_num(model.P(i, i)) + " must equal 1", i, i});
        }
        if (model.E(i, i) != 1.0) {
            report.push_back({"E_{" + si + "," + si + "} = " + fmt_num(model.E(i, i)) + " must equal 1", i, i});
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            const double pij = model.P(i, j);
            if (!(pij >= 0.0 && pij <= 1.0)) {
                report.push_back({"p_" + si + std::to_string(j + 1) + " = " + fmt_num(pij) + " outside [0,1]", i, j});
            }
        }
    }
    if (!report.empty()) return report;

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const auto tag = std::to_string(i + 1) + "," + std::to_string(j + 1);
            const auto ij = std::to_string(i + 1) + std::to_string(j + 1);
            const auto ji = std::to_string(j + 1) + std::to_string(i + 1);
            const double e = model.E(i, j);
            const double pij = model.P(i, j);
            const double pji = model.P(j, i);
            if (e != model.E(j, i)) {
                report.push_back({"E not symmetric at {" + tag + "}", i, j});
                continue;
            }
            const double prod = pij * pji;
            if (e < prod - prob_slack) {
                report.push_back({"E_{" + tag + "} < p_" + ij + "·p_" + ji + " = " + fmt_num(prod), i, j});
            }
            const double lower = std::max(0.0, pij + pji - 1.0);
            if (e < lower - prob_slack) {
                report.push_back({"E_{" + tag + "} < max(0, p_" + ij + " + p_" + ji + " - 1) = " + fmt_num(lower), i, j});
            }
            const double upper = std::min(pij, pji);
            if (e > upper + prob_slack) {
                report.push_back({"E_{" + tag + "} > min(p_" + ij + ", p_" + ji + ") = " + fmt_num(upper), i, j});
            }
        }
    }
    return report;
}

inline void require_valid(const NetworkModel& model)
{
    const auto report = validate_model(model);
    if (!report.empty()) {
        throw std::invalid_argument("invalid network model: " + report.front().message);
    }
}

/// One draw of every Bernoulli link.
struct LinkRealization
{
    std::vector<std::uint8_t> tau_ps;  // node -> PS
    std::vector<std::uint8_t> tau_nn;  // row-major n x n, tau_nn[i*n + j] is link i -> j

    std::size_t size() const noexcept { return tau_ps.size(); }

    bool ps(std::size_t i) const noexcept { return tau_ps[i] != 0; }
    bool link(std::size_t i, std::size_t j) const noexcept { return tau_nn[i * size() + j] != 0; }

    bool operator==(const LinkRealization&) const = default;
};

namespace detail {

// Assumes a validated model; draws PS links first, then pairs i < j in
// row-major order from the joint pmf of (tau_ij, tau_ji).
template <class URBG>
LinkRealization sample_links_unchecked(const NetworkModel& model, URBG& rng)
{
    const auto n = static_cast<std::size_t>(model.size());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    LinkRealization out;
    out.tau_ps.resize(n);
    out.tau_nn.assign(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        out.tau_ps[i] = unif(rng) < model.p(i) ? 1 : 0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.tau_nn[i * n + i] = 1;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double e = model.E(i, j);
            const double pij = model.P(i, j);
            const double pji = model.P(j, i);
            const double u = unif(rng);
            std::uint8_t a = 0;
            std::uint8_t b = 0;
            if (u < e) {
                a = b = 1;
            } else if (u < pij) {
                a = 1;
            } else if (u < pij + pji - e) {
                b = 1;
            }
            out.tau_nn[i * n + j] = a;
            out.tau_nn[j * n + i] = b;
        }
    }
    return out;
}

} // namespace detail

/// Samples all links. PS links are independent Bernoulli(p_i); each
/// unordered pair is drawn from the unique joint pmf matching
/// (p_ij, p_ji, E_ij); pairs are mutually independent.
template <class URBG>
LinkRealization sample_links(const NetworkModel& model, URBG& rng)
{
    require_valid(model);
    return detail::sample_links_unchecked(model, rng);
}

/// Erdős–Rényi collaboration graph: P_ij = p_c off the diagonal,
/// independent reciprocal links.
inline NetworkModel erdos_renyi_model(Eigen::Index n, double p_c, const Vector& p)
{
    if (n < 1) throw std::invalid_argument("n must be positive");
    if (!(p_c >= 0.0 && p_c <= 1.0)) {
        throw std::invalid_argument("p_c = " + detail::fmt_num(p_c) + " outside [0,1]");
    }
    if (p.size() != n) throw std::invalid_argument("p must have n entries");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(p(i) > 0.0 && p(i) <= 1.0)) {
            throw std::invalid_argument("p_" + std::to_string(i + 1) + " = " + detail::fmt_num(p(i)) + " outside (0,1]");
        }
    }
    Matrix P = Matrix::Constant(n, n, p_c);
    P.diagonal().setOnes();
    return NetworkModel::with_independent_links(p, std::move(P));
}

} // namespace pricer
