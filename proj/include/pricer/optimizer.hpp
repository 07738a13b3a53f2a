#pragma once
#include <pricer/analysis.hpp>
#include <pricer/privacy.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pricer {

/// Raised when the unbiasedness hyperplane of some row does not meet its
/// privacy box. `deficit` is sum_j p_j p_ij w_ij - target (negative).
class InfeasibleError : public std::runtime_error
{
public:
    InfeasibleError(const std::string& what, Eigen::Index row, double deficit = 0.0)
        : std::runtime_error(what), row_(row), deficit_(deficit)
    {}

    Eigen::Index row() const noexcept { return row_; }
    double deficit() const noexcept { return deficit_; }

private:
    Eigen::Index row_;
    double deficit_;
};

struct WeightSolution
{
    Matrix A;
    double sigma = 0.0;
};

struct OptimizerConfig
{
    int outer_iterations = 10;            // K
    std::optional<int> relaxed_steps;     // L1, defaults to 50 n
    std::optional<int> finetune_steps;    // L2, defaults to 50 n
    double bisection_tol = 1e-12;
    double unbiased_tol = 1e-9;

    int resolved_relaxed_steps(Eigen::Index n) const { return relaxed_steps.value_or(static_cast<int>(50 * n)); }
    int resolved_finetune_steps(Eigen::Index n) const { return finetune_steps.value_or(static_cast<int>(50 * n)); }

    void validate() const
    {
        if (outer_iterations < 1) throw std::invalid_argument("K must be >= 1");
        if (relaxed_steps && *relaxed_steps < 1) throw std::invalid_argument("L1 must be >= 1");
        if (finetune_steps && *finetune_steps < 1) throw std::invalid_argument("L2 must be >= 1");
        if (!(bisection_tol > 0.0) || !(unbiased_tol > 0.0)) {
            throw std::invalid_argument("tolerances must be positive");
        }
    }
};

enum class SweepMode { relaxed, finetune };

/// Smallest noise level at which every row's privacy box reaches its
/// unbiasedness hyperplane.
inline double sigma_threshold(const NetworkModel& model, const PrivacySpec& spec)
{
    const auto n = model.size();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        CompensatedSum s;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double c = model.p(j) * model.P(i, j);
            if (c == 0.0 || spec.eps(i, j) == 0.0) continue;
            s += c * spec.eps(i, j) / gaussian_factor(spec.delta(i, j));
        }
        const double reach = s.value();
        if (!(reach > 0.0)) {
            throw InfeasibleError("row " + std::to_string(i + 1) +
                                      " has no usable link with a positive privacy budget",
                                  i, -1.0);
        }
        worst = std::max(worst, 1.0 / reach);
    }
    return 2.0 * spec.R * worst;
}

/// Smallest sigma >= sigma_thr under which A meets every privacy cap.
inline double update_sigma(const Matrix& A, const PrivacySpec& spec, double sigma_thr)
{
    double sigma = sigma_thr;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            const double a = A(i, j);
            if (a == 0.0) continue;
            if (spec.eps(i, j) == 0.0) {
                throw InfeasibleError("weight a_" + std::to_string(i + 1) + std::to_string(j + 1) +
                                          " > 0 on a link with zero privacy budget",
                                      i);
            }
            const double need = gaussian_factor(spec.delta(i, j)) * 2.0 * a * spec.R / spec.eps(i, j);
            if (need > sigma) sigma = need;
        }
    }
    return sigma;
}

// =======================================================================
// Row subproblem
// =======================================================================

/// Row-i subproblem after fixing every other row: for each free column j,
/// a_j(lambda) = min{ (lambda - offset_j)^+ / denom_j, cap_j } and the
/// constraint is sum_j coeff_j a_j(lambda) = target.
struct RowProblem
{
    std::vector<Eigen::Index> cols;
    std::vector<double> coeff;   // p_j p_ij
    std::vector<double> offset;
    std::vector<double> denom;
    std::vector<double> cap;
    double target = 1.0;

    double weight(std::size_t k, double lambda) const noexcept
    {
        const double a = std::max(0.0, (lambda - offset[k]) / denom[k]);
        return std::min(a, cap[k]);
    }

    double row_sum(double lambda) const noexcept
    {
        CompensatedSum s;
        for (std::size_t k = 0; k < cols.size(); ++k) s += coeff[k] * weight(k, lambda);
        return s.value();
    }

    double reachable() const noexcept
    {
        CompensatedSum s;
        for (std::size_t k = 0; k < cols.size(); ++k) s += coeff[k] * cap[k];
        return s.value();
    }

    /// Upper end of the standard bisection interval:
    /// max_j { denom_j / coeff_j + offset_j }, at which every free weight
    /// reaches at least min(1 / coeff_j, cap_j).
    double interval_upper() const noexcept
    {
        double hi = 0.0;
        for (std::size_t k = 0; k < cols.size(); ++k) hi = std::max(hi, denom[k] / coeff[k] + offset[k]);
        return hi;
    }
};

struct BisectionResult
{
    double lambda = 0.0;
    double upper = 0.0;       // interval upper end actually used
    int expansions = 0;       // times the standard upper end had to be doubled
    double residual = 0.0;    // |row_sum(lambda) - target|
};

/// Finds lambda with row_sum(lambda) = target on [0, upper]. Stops when the
/// bracket is narrower than `bisection_tol` or the residual is below
/// `unbiased_tol`, then interpolates linearly inside the final bracket.
inline BisectionResult bisect_lambda(const RowProblem& row, double target, double upper,
                                     double bisection_tol, double unbiased_tol)
{
    BisectionResult out;
    double lo = 0.0;
    double f_lo = row.row_sum(lo);
    if (target <= f_lo) {
        out.lambda = 0.0;
        out.upper = upper;
        out.residual = std::abs(f_lo - target);
        return out;
    }

    double hi = std::max(upper, std::numeric_limits<double>::min());
    double f_hi = row.row_sum(hi);
    while (f_hi < target && out.expansions < 64) {
        const double next = 2.0 * hi;
        const double f_next = row.row_sum(next);
        if (f_next <= f_hi) break;  // saturated
        lo = hi;
        f_lo = f_hi;
        hi = next;
        f_hi = f_next;
        ++out.expansions;
    }
    out.upper = hi;
    if (f_hi < target) {
        if (target - f_hi <= unbiased_tol) {
            out.lambda = hi;
            out.residual = target - f_hi;
            return out;
        }
        throw InfeasibleError("row target unreachable within its privacy caps", -1, f_hi - target);
    }

    double best = hi;
    double best_res = f_hi - target;
    for (int it = 0; it < 400 && hi - lo > bisection_tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double f_mid = row.row_sum(mid);
        if (std::abs(f_mid - target) < best_res) {
            best = mid;
            best_res = std::abs(f_mid - target);
        }
        if (f_mid < target) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
        if (best_res < unbiased_tol) break;
    }

    // row_sum is piecewise linear; interpolate inside the final bracket.
    if (hi > lo && f_hi > f_lo) {
        const double lambda = std::clamp(lo + (target - f_lo) * (hi - lo) / (f_hi - f_lo), lo, hi);
        const double res = std::abs(row.row_sum(lambda) - target);
        if (res < best_res) {
            best = lambda;
            best_res = res;
        }
    }
    out.lambda = best;
    out.residual = best_res;
    return out;
}

namespace detail {

// sum_{l != i} p_lj a_lj for every column j.
inline double column_inflow_excluding(const NetworkModel& model, const Matrix& A, Eigen::Index i, Eigen::Index j)
{
    CompensatedSum s;
    for (Eigen::Index l = 0; l < model.size(); ++l) {
        if (l != i) s += model.P(l, j) * A(l, j);
    }
    return s.value();
}

inline RowProblem make_row_problem(Eigen::Index i, const Matrix& A_prev, const NetworkModel& model,
                                   const Matrix& caps, SweepMode mode, bool interior_only)
{
    RowProblem rp;
    const double p_i = model.p(i);
    for (Eigen::Index j = 0; j < model.size(); ++j) {
        const double c = model.p(j) * model.P(i, j);
        if (c == 0.0) continue;
        if (interior_only && c == 1.0) continue;
        const double inflow = column_inflow_excluding(model, A_prev, i, j);
        // E/p_ij - p_ji, evaluated only where p_ij > 0; zero for j = i.
        const double reciprocity = (j == i) ? 0.0 : model.E(i, j) / model.P(i, j) - model.P(j, i);
        double offset = 2.0 * (1.0 - model.p(j)) * inflow;
        double denom = 0.0;
        if (mode == SweepMode::relaxed) {
            denom = 2.0 * ((1.0 - c) + p_i * reciprocity);
        } else {
            denom = 2.0 * (1.0 - c);
            if (j != i) offset += 2.0 * p_i * reciprocity * A_prev(j, i);
        }
        rp.cols.push_back(j);
        rp.coeff.push_back(c);
        rp.offset.push_back(offset);
        rp.denom.push_back(denom);
        rp.cap.push_back(caps(i, j));
    }
    return rp;
}

struct RowUpdate
{
    Vector row;
    std::optional<BisectionResult> bisection;
};

inline RowUpdate row_update(Eigen::Index i, const Matrix& A_prev, const NetworkModel& model,
                            const Matrix& caps, SweepMode mode, const OptimizerConfig& cfg)
{
    const auto n = model.size();
    RowUpdate out;
    out.row = Vector::Zero(n);

    if (model.p(i) == 1.0 && caps(i, i) >= 1.0) {
        out.row(i) = 1.0;
        return out;
    }

    // Perfect links (p_j p_ij = 1) carry no variance. When p_i = 1 but the
    // self weight cannot reach 1, the self link joins them.
    auto perfect = [&](Eigen::Index j) { return model.p(j) * model.P(i, j) == 1.0; };
    double perfect_mass = 0.0;
    bool has_perfect = false;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (perfect(j)) {
            has_perfect = true;
            perfect_mass += caps(i, j);
        }
    }

    double target = 1.0;
    if (has_perfect) {
        if (perfect_mass >= 1.0) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (perfect(j)) out.row(j) = caps(i, j) / perfect_mass;
            }
            return out;
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            if (perfect(j)) out.row(j) = caps(i, j);
        }
        target = 1.0 - perfect_mass;
    }

    RowProblem rp = make_row_problem(i, A_prev, model, caps, mode, has_perfect);
    rp.target = target;
    const double reach = rp.reachable();
    if (reach < target - cfg.unbiased_tol) {
        throw InfeasibleError("row " + std::to_string(i + 1) +
                                  ": privacy caps cannot reach the unbiasedness hyperplane",
                              i, reach - target);
    }
    BisectionResult b;
    try {
        b = bisect_lambda(rp, target, rp.interval_upper(), cfg.bisection_tol, cfg.unbiased_tol);
    } catch (const InfeasibleError& e) {
        throw InfeasibleError("row " + std::to_string(i + 1) + ": " + e.what(), i, e.deficit());
    }
    for (std::size_t k = 0; k < rp.cols.size(); ++k) out.row(rp.cols[k]) = rp.weight(k, b.lambda);
    out.bisection = b;
    return out;
}

} // namespace detail

/// Exact minimizer of the relaxed objective over row i, other rows fixed.
inline Vector relaxed_row_update(Eigen::Index i, const Matrix& A_prev, const NetworkModel& model,
                                 const Matrix& caps, const OptimizerConfig& cfg = {})
{
    return detail::row_update(i, A_prev, model, caps, SweepMode::relaxed, cfg).row;
}

/// Exact minimizer of sigma_tv^2 over row i, other rows fixed.
inline Vector finetune_row_update(Eigen::Index i, const Matrix& A_prev, const NetworkModel& model,
                                  const Matrix& caps, const OptimizerConfig& cfg = {})
{
    return detail::row_update(i, A_prev, model, caps, SweepMode::finetune, cfg).row;
}

using SweepObserver = std::function<void(int step, Eigen::Index row, const Matrix& A)>;

struct SweepStats
{
    int bracket_expansions = 0;
    double max_residual = 0.0;
};

/// Cyclic Gauss-Seidel: step l (1-based) replaces row (l - 1) mod n.
inline Matrix gauss_seidel_sweeps(Matrix A, const NetworkModel& model, const Matrix& caps, int steps,
                                  SweepMode mode, const OptimizerConfig& cfg = {},
                                  const SweepObserver& observer = {}, SweepStats* stats = nullptr)
{
    const auto n = model.size();
    for (int step = 1; step <= steps; ++step) {
        const Eigen::Index i = (step - 1) % n;
        auto upd = detail::row_update(i, A, model, caps, mode, cfg);
        A.row(i) = upd.row.transpose();
        if (stats && upd.bisection) {
            stats->bracket_expansions += upd.bisection->expansions;
            stats->max_residual = std::max(stats->max_residual, upd.bisection->residual);
        }
        if (observer) observer(step, i, A);
    }
    return A;
}

/// Objective of the joint problem: R^2 sigma_tv^2(A) + sigma_pr^2(sigma).
inline double joint_objective(const NetworkModel& model, const PrivacySpec& spec, const Matrix& A,
                              double sigma, Eigen::Index d)
{
    return mse_upper_bound(model, A, sigma, d, spec.R).total;
}

struct OptimizationResult
{
    WeightSolution solution;
    double sigma_threshold = 0.0;
    /// Objective at the start, then after each outer round.
    std::vector<double> objective_trace;
    int bracket_expansions = 0;

    double objective() const { return objective_trace.back(); }
};

/// Alternating minimization over (A, sigma): each outer round runs L1
/// relaxed Gauss-Seidel steps, L2 fine-tuning steps, then the closed-form
/// sigma update. Starts from A = diag(1/p_i) and sigma = sigma_thr, with
/// sigma raised first when the diagonal start breaks a privacy cap.
inline OptimizationResult optimize(const NetworkModel& model, const PrivacySpec& spec, Eigen::Index d,
                                   const OptimizerConfig& cfg = {})
{
    require_valid(model);
    cfg.validate();
    if (const auto pr = validate_privacy(spec, model); !pr.errors.empty()) {
        throw std::invalid_argument("invalid privacy spec: " + pr.errors.front().message);
    }
    const auto n = model.size();

    OptimizationResult out;
    out.sigma_threshold = sigma_threshold(model, spec);

    Matrix A = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) A(i, i) = 1.0 / model.p(i);
    double sigma = update_sigma(A, spec, out.sigma_threshold);
    out.objective_trace.push_back(joint_objective(model, spec, A, sigma, d));

    const int l1 = cfg.resolved_relaxed_steps(n);
    const int l2 = cfg.resolved_finetune_steps(n);
    for (int k = 0; k < cfg.outer_iterations; ++k) {
        const Matrix caps = weight_caps(spec, sigma);
        SweepStats stats;
        A = gauss_seidel_sweeps(std::move(A), model, caps, l1, SweepMode::relaxed, cfg, {}, &stats);
        A = gauss_seidel_sweeps(std::move(A), model, caps, l2, SweepMode::finetune, cfg, {}, &stats);
        out.bracket_expansions += stats.bracket_expansions;
        sigma = update_sigma(A, spec, out.sigma_threshold);
        out.objective_trace.push_back(joint_objective(model, spec, A, sigma, d));
    }
    out.solution = WeightSolution{std::move(A), sigma};
    return out;
}

/// Re-checks every WeightSolution invariant; empty report iff all hold.
inline ValidationReport check_solution(const NetworkModel& model, const PrivacySpec& spec,
                                       const WeightSolution& sol, double unbiased_tol = 1e-6,
                                       double cap_tol = 1e-9)
{
    ValidationReport report;
    const auto n = model.size();
    if (sol.A.rows() != n || sol.A.cols() != n) {
        report.push_back({"A must be n x n"});
        return report;
    }
    if (!(sol.sigma >= 0.0)) report.push_back({"sigma must be nonnegative"});
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto tag = std::to_string(i + 1) + std::to_string(j + 1);
            const double a = sol.A(i, j);
            if (!(a >= 0.0)) report.push_back({"a_" + tag + " negative", i, j});
            if (model.P(i, j) == 0.0 && a != 0.0) report.push_back({"a_" + tag + " nonzero on absent link", i, j});
            const double cap = weight_cap(spec.eps(i, j), spec.delta(i, j), sol.sigma, spec.R);
            if (a > cap + cap_tol) report.push_back({"a_" + tag + " exceeds privacy cap", i, j});
        }
    }
    const Vector res = unbiasedness_residual(model, sol.A);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (res(i) > unbiased_tol) report.push_back({"row " + std::to_string(i + 1) + " biased", i});
    }
    return report;
}

} // namespace pricer
