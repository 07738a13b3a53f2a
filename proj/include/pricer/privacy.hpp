#pragma once
#include <pricer/network_model.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace pricer {

/// Per ordered pair privacy budgets. `eps(i, j)` and `delta(i, j)` bound
/// what an observer of the transmission i -> j may learn about x_i; every
/// data vector satisfies ||x_i|| <= R.
struct PrivacySpec
{
    double R = 1.0;
    Matrix eps;
    Matrix delta;

    static PrivacySpec uniform(Eigen::Index n, double R, double eps, double delta)
    {
        return PrivacySpec{R, Matrix::Constant(n, n, eps), Matrix::Constant(n, n, delta)};
    }
};

struct DpGuarantee
{
    double epsilon = 0.0;
    double delta = 0.0;
};

/// sqrt(2 ln(1.25 / delta)), the Gaussian-mechanism calibration factor.
inline double gaussian_factor(double delta)
{
    if (!(delta > 0.0 && delta <= 1.0)) {
        throw std::invalid_argument("delta must lie in (0,1]");
    }
    return std::sqrt(2.0 * std::log(1.25 / delta));
}

inline double l2_sensitivity(double alpha, double R) noexcept
{
    return 2.0 * alpha * R;
}

/// Privacy of the signal tau_ij (alpha x_i + n_ij): epsilon from the
/// Gaussian mechanism, failure probability amplified by the link
/// probability.
inline DpGuarantee achieved_epsilon(double alpha, double R, double sigma, double delta, double p_link)
{
    const double g = gaussian_factor(delta);
    if (p_link == 0.0) return {0.0, 0.0};
    if (alpha == 0.0) return {0.0, p_link * delta};
    if (!(sigma > 0.0)) {
        throw std::domain_error("privacy guarantee undefined: sigma = 0 with nonzero weight");
    }
    return {g * l2_sensitivity(alpha, R) / sigma, p_link * delta};
}

/// Largest weight that keeps the pair within (eps_budget, delta_budget) at noise sigma.
inline double weight_cap(double eps_budget, double delta_budget, double sigma, double R)
{
    if (!(R > 0.0)) throw std::invalid_argument("R must be positive");
    const double g = gaussian_factor(delta_budget);
    if (sigma == 0.0 || eps_budget == 0.0) return 0.0;
    return eps_budget * sigma / (2.0 * R * g);
}

inline Matrix weight_caps(const PrivacySpec& spec, double sigma)
{
    Matrix caps(spec.eps.rows(), spec.eps.cols());
    for (Eigen::Index i = 0; i < caps.rows(); ++i) {
        for (Eigen::Index j = 0; j < caps.cols(); ++j) {
            caps(i, j) = weight_cap(spec.eps(i, j), spec.delta(i, j), sigma, spec.R);
        }
    }
    return caps;
}

/// i.i.d. N(0, sigma^2) entries. Always consumes d normal draws so the
/// stream layout does not depend on sigma.
template <class URBG>
Vector sample_noise(double sigma, Eigen::Index d, URBG& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector out(d);
    for (Eigen::Index k = 0; k < d; ++k) out(k) = sigma * normal(rng);
    return out;
}

struct PrivacyReport
{
    ValidationReport errors;
    ValidationReport warnings;
};

inline PrivacyReport validate_privacy(const PrivacySpec& spec, const NetworkModel& model)
{
    PrivacyReport r;
    const auto n = model.size();
    if (!(spec.R > 0.0)) r.errors.push_back({"R must be positive"});
    if (spec.eps.rows() != n || spec.eps.cols() != n || spec.delta.rows() != n || spec.delta.cols() != n) {
        r.errors.push_back({"eps and delta must be " + std::to_string(n) + "x" + std::to_string(n)});
        return r;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto tag = std::to_string(i + 1) + std::to_string(j + 1);
            const double dl = spec.delta(i, j);
            const double ep = spec.eps(i, j);
            if (!(dl > 0.0 && dl <= 1.0)) {
                r.errors.push_back({"delta_" + tag + " outside (0,1]", i, j});
            } else if (dl == 1.0) {
                r.warnings.push_back({"delta_" + tag + " = 1 gives a vacuous guarantee", i, j});
            }
            if (!(ep >= 0.0) || !std::isfinite(ep)) {
                r.errors.push_back({"eps_" + tag + " must be finite and nonnegative", i, j});
            } else if (ep == 0.0 && model.p(j) * model.P(i, j) > 0.0) {
                r.errors.push_back({"eps_" + tag + " = 0 on a usable link", i, j});
            }
        }
    }
    return r;
}

} // namespace pricer
