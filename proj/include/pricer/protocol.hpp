#pragma once
#include <pricer/network_model.hpp>
#include <pricer/privacy.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <limits>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

namespace pricer {

/// One vector per node, all of dimension d.
struct DataSet
{
    std::vector<Vector> x;

    std::size_t size() const noexcept { return x.size(); }
    Eigen::Index dim() const noexcept { return x.empty() ? 0 : x.front().size(); }

    Vector mean() const
    {
        Vector m = Vector::Zero(dim());
        for (const auto& v : x) m += v;
        return m / static_cast<double>(size());
    }

    /// Throws unless every vector has dimension d and norm at most R.
    void validate(double R) const
    {
        if (x.empty()) throw std::invalid_argument("empty data set");
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i].size() != dim()) throw std::invalid_argument("data dimension mismatch");
            if (x[i].norm() > R * (1.0 + 1e-12)) {
                throw std::invalid_argument("||x_" + std::to_string(i + 1) + "|| exceeds R");
            }
        }
    }
};

struct TrialResult
{
    Vector estimate;
    double squared_error = 0.0;
    LinkRealization realization;
};

/// Stage 1: node i aggregates x~_i = sum_j tau_ji (a_ji x_j + n_ji).
///
/// Noise for every ordered pair (j, i) is drawn, in row-major (j, i)
/// order, whether or not the link is up, so the stream layout does not
/// depend on the realization.
template <class URBG>
std::vector<Vector> stage1_local_aggregate(const DataSet& data, const Matrix& A, double sigma,
                                           const LinkRealization& links, URBG& rng)
{
    const auto n = data.size();
    const auto d = data.dim();
    if (static_cast<std::size_t>(A.rows()) != n || static_cast<std::size_t>(A.cols()) != n ||
        links.size() != n) {
        throw std::invalid_argument("stage 1: dimension mismatch between data, weights and links");
    }
    std::vector<Vector> local(n, Vector::Zero(d));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector noise(d);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < d; ++k) noise(k) = sigma * normal(rng);
            if (!links.link(j, i)) continue;
            local[i].noalias() += A(j, i) * data.x[j] + noise;
        }
    }
    return local;
}

/// Stage 2: x^ = (1/n) sum_i tau_i x~_i. Divides by n, not by the number received.
inline Vector stage2_global_aggregate(const std::vector<Vector>& local, const std::vector<std::uint8_t>& tau_ps,
                                      std::size_t n)
{
    if (local.size() != tau_ps.size()) throw std::invalid_argument("stage 2: size mismatch");
    const auto d = local.empty() ? 0 : local.front().size();
    Vector est = Vector::Zero(d);
    for (std::size_t i = 0; i < local.size(); ++i) {
        if (local[i].size() != d) throw std::invalid_argument("stage 2: dimension mismatch");
        if (tau_ps[i]) est += local[i];
    }
    return est / static_cast<double>(n);
}

/// Baseline: the PS averages whichever raw vectors arrive, dividing by n.
inline Vector naive_estimate(const DataSet& data, const std::vector<std::uint8_t>& tau_ps)
{
    Vector est = Vector::Zero(data.dim());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (tau_ps[i]) est += data.x[i];
    }
    return est / static_cast<double>(data.size());
}

struct MonteCarloOptions
{
    std::size_t trials = 1000;
    std::uint64_t master_seed = 0;
    unsigned threads = 1;
    bool keep_records = false;
    double norm_bound = std::numeric_limits<double>::infinity();  // R, checked at entry
};

struct MonteCarloResult
{
    std::size_t trials = 0;
    double mse_pricer = 0.0;
    double mse_pricer_stderr = 0.0;
    double mse_naive = 0.0;
    double mse_naive_stderr = 0.0;
    Vector mean_estimate;         // average PriCER estimate
    Vector mean_estimate_stderr;  // componentwise standard error of mean_estimate
    std::vector<TrialResult> records;
};

namespace detail {

struct TrialOutput
{
    Vector estimate;
    double sq_pricer = 0.0;
    double sq_naive = 0.0;
    LinkRealization links;
};

inline TrialOutput run_trial(const NetworkModel& model, const DataSet& data, const Vector& truth,
                             const Matrix& A, double sigma, std::uint64_t master_seed, std::uint64_t t)
{
    auto rng = make_stream(master_seed, t);
    TrialOutput out;
    out.links = sample_links_unchecked(model, rng);
    const auto local = stage1_local_aggregate(data, A, sigma, out.links, rng);
    out.estimate = stage2_global_aggregate(local, out.links.tau_ps, data.size());
    out.sq_pricer = (out.estimate - truth).squaredNorm();
    out.sq_naive = (naive_estimate(data, out.links.tau_ps) - truth).squaredNorm();
    return out;
}

// Mean and standard error of the mean, reduced in index order.
inline std::pair<double, double> mean_and_stderr(const std::vector<double>& v)
{
    const double m = static_cast<double>(v.size());
    CompensatedSum s;
    for (double x : v) s += x;
    const double mean = s.value() / m;
    if (v.size() < 2) return {mean, 0.0};
    CompensatedSum ss;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss.value() / (m - 1.0) / m)};
}

} // namespace detail

/// Monte-Carlo estimate of PriCER and naive MSE. Trial t uses its own
/// stream derived from (master_seed, t), and results are reduced in trial
/// order, so output is identical for any thread count.
inline MonteCarloResult run_monte_carlo(const NetworkModel& model, const DataSet& data, const Matrix& A,
                                        double sigma, const MonteCarloOptions& opt)
{
    if (opt.trials == 0) throw std::invalid_argument("trials must be positive");
    require_valid(model);
    if (data.size() != static_cast<std::size_t>(model.size())) {
        throw std::invalid_argument("data set size differs from node count");
    }
    if (A.rows() != model.size() || A.cols() != model.size()) {
        throw std::invalid_argument("weight matrix must be n x n");
    }
    data.validate(opt.norm_bound);
    const Vector truth = data.mean();
    const auto d = data.dim();
    const std::size_t T = opt.trials;

    std::vector<double> sq_pricer(T);
    std::vector<double> sq_naive(T);
    std::vector<Vector> estimates(T);
    std::vector<LinkRealization> realizations(opt.keep_records ? T : 0);

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            auto r = detail::run_trial(model, data, truth, A, sigma, opt.master_seed, t);
            sq_pricer[t] = r.sq_pricer;
            sq_naive[t] = r.sq_naive;
            estimates[t] = std::move(r.estimate);
            if (opt.keep_records) realizations[t] = std::move(r.links);
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(T)));
    if (threads == 1) {
        work(0, T);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (T + threads - 1) / threads;
        for (unsigned w = 0; w < threads; ++w) {
            const std::size_t b = w * chunk;
            const std::size_t e = std::min(T, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
    }

    MonteCarloResult out;
    out.trials = T;
    std::tie(out.mse_pricer, out.mse_pricer_stderr) = detail::mean_and_stderr(sq_pricer);
    std::tie(out.mse_naive, out.mse_naive_stderr) = detail::mean_and_stderr(sq_naive);

    out.mean_estimate.resize(d);
    out.mean_estimate_stderr.resize(d);
    std::vector<double> comp(T);
    for (Eigen::Index k = 0; k < d; ++k) {
        for (std::size_t t = 0; t < T; ++t) comp[t] = estimates[t](k);
        std::tie(out.mean_estimate(k), out.mean_estimate_stderr(k)) = detail::mean_and_stderr(comp);
    }

    if (opt.keep_records) {
        out.records.reserve(T);
        for (std::size_t t = 0; t < T; ++t) {
            out.records.push_back({std::move(estimates[t]), sq_pricer[t], std::move(realizations[t])});
        }
    }
    return out;
}

} // namespace pricer
