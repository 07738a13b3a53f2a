#pragma once
#include <pricer/analysis.hpp>
#include <pricer/network_model.hpp>
#include <pricer/optimizer.hpp>
#include <pricer/privacy.hpp>
#include <pricer/protocol.hpp>

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pricer::experiments {

enum class Kind { trust_sweep, good_nodes_sweep, custom };

inline std::string to_string(Kind k)
{
    switch (k) {
    case Kind::trust_sweep: return "trust_sweep";
    case Kind::good_nodes_sweep: return "good_nodes_sweep";
    case Kind::custom: return "custom";
    }
    return "custom";
}

inline Kind kind_from_string(const std::string& s)
{
    if (s == "trust_sweep") return Kind::trust_sweep;
    if (s == "good_nodes_sweep") return Kind::good_nodes_sweep;
    if (s == "custom") return Kind::custom;
    throw std::invalid_argument("unknown experiment kind '" + s + "'");
}

using Rows = std::vector<std::vector<double>>;

struct NetworkParams
{
    int n = 10;
    std::vector<double> p{0.1, 0.1, 0.8, 0.1, 0.1, 0.9, 0.1, 0.1, 0.9, 0.1};
    double p_c = 0.8;
    Rows P;  // explicit node-node matrix; overrides p_c when non-empty
    Rows E;  // explicit reciprocity; independence when empty

    bool operator==(const NetworkParams&) const = default;
};

struct PrivacyParams
{
    double eps_high = 1e3;
    double eps_low = 0.1;
    double delta = 1e-3;
    double R = 1.0;
    int trusted_neighbors = 6;  // custom / good_nodes_sweep
    Rows eps;                   // explicit budgets for custom runs

    bool operator==(const PrivacyParams&) const = default;
};

struct DataParams
{
    int d = 32;
    std::string distribution = "heavy_tailed";  // heavy_tailed | gaussian

    bool operator==(const DataParams&) const = default;
};

struct OptimizerParams
{
    int K = 10;
    std::optional<int> L1;
    std::optional<int> L2;
    double bisection_tol = 1e-12;
    double unbiased_tol = 1e-9;

    bool operator==(const OptimizerParams&) const = default;

    OptimizerConfig to_config() const { return OptimizerConfig{K, L1, L2, bisection_tol, unbiased_tol}; }
};

struct TrustSweepParams
{
    std::vector<int> k_values{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    int empirical_trials = 0;  // > 0 adds a Monte-Carlo empirical_mse column

    bool operator==(const TrustSweepParams&) const = default;
};

struct GoodNodesParams
{
    double p_good = 0.9;
    double p_bad = 0.2;
    std::vector<int> num_good_values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

    bool operator==(const GoodNodesParams&) const = default;
};

struct ExperimentConfig
{
    Kind kind = Kind::trust_sweep;
    NetworkParams network;
    PrivacyParams privacy;
    DataParams data;
    OptimizerParams optimizer;
    TrustSweepParams trust_sweep;
    GoodNodesParams good_nodes;
    int trials = 50;
    std::uint64_t master_seed = 1;
    unsigned threads = 1;
    std::string output = "out";

    bool operator==(const ExperimentConfig&) const = default;

    void validate() const
    {
        auto prob = [](double v, const char* what) {
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " outside [0,1]");
        };
        if (network.n < 1) throw std::invalid_argument("network.n must be positive");
        if (kind != Kind::good_nodes_sweep && static_cast<int>(network.p.size()) != network.n) {
            throw std::invalid_argument("network.p must have n entries");
        }
        for (double v : network.p) prob(v, "network.p entry");
        prob(network.p_c, "network.p_c");
        for (const auto& r : network.P) for (double v : r) prob(v, "network.P entry");
        for (const auto& r : network.E) for (double v : r) prob(v, "network.E entry");
        prob(good_nodes.p_good, "good_nodes.p_good");
        prob(good_nodes.p_bad, "good_nodes.p_bad");
        if (trials < 1) throw std::invalid_argument("trials must be >= 1");
        if (data.d < 1) throw std::invalid_argument("data.d must be >= 1");
        if (data.distribution != "heavy_tailed" && data.distribution != "gaussian") {
            throw std::invalid_argument("data.distribution must be heavy_tailed or gaussian");
        }
        optimizer.to_config().validate();
    }
};

// =======================================================================
// JSON
// =======================================================================

using nlohmann::json;

namespace detail {

template <class T>
void get_opt(const json& j, const char* key, T& out)
{
    if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

template <class T>
void get_opt(const json& j, const char* key, std::optional<T>& out)
{
    if (auto it = j.find(key); it != j.end()) {
        if (it->is_null()) out.reset();
        else out = it->get<T>();
    }
}

inline json opt_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

} // namespace detail

inline json to_json(const ExperimentConfig& c)
{
    return json{
        {"experiment", to_string(c.kind)},
        {"network", {{"n", c.network.n}, {"p", c.network.p}, {"p_c", c.network.p_c},
                     {"P", c.network.P}, {"E", c.network.E}}},
        {"privacy", {{"eps_high", c.privacy.eps_high}, {"eps_low", c.privacy.eps_low},
                     {"delta", c.privacy.delta}, {"R", c.privacy.R},
                     {"trusted_neighbors", c.privacy.trusted_neighbors}, {"eps", c.privacy.eps}}},
        {"data", {{"d", c.data.d}, {"distribution", c.data.distribution}}},
        {"optimizer", {{"K", c.optimizer.K}, {"L1", detail::opt_json(c.optimizer.L1)},
                       {"L2", detail::opt_json(c.optimizer.L2)},
                       {"bisection_tol", c.optimizer.bisection_tol},
                       {"unbiased_tol", c.optimizer.unbiased_tol}}},
        {"trust_sweep", {{"k_values", c.trust_sweep.k_values},
                         {"empirical_trials", c.trust_sweep.empirical_trials}}},
        {"good_nodes_sweep", {{"p_good", c.good_nodes.p_good}, {"p_bad", c.good_nodes.p_bad},
                              {"num_good_values", c.good_nodes.num_good_values}}},
        {"trials", c.trials},
        {"master_seed", c.master_seed},
        {"threads", c.threads},
        {"output", c.output},
    };
}

/// Missing keys keep their defaults. `master_seed` is required.
inline ExperimentConfig config_from_json(const json& j)
{
    using detail::get_opt;
    ExperimentConfig c;
    if (auto it = j.find("experiment"); it != j.end()) c.kind = kind_from_string(it->get<std::string>());
    if (!j.contains("master_seed")) throw std::invalid_argument("config must set master_seed");
    if (auto it = j.find("network"); it != j.end()) {
        get_opt(*it, "n", c.network.n);
        get_opt(*it, "p", c.network.p);
        get_opt(*it, "p_c", c.network.p_c);
        get_opt(*it, "P", c.network.P);
        get_opt(*it, "E", c.network.E);
    }
    if (auto it = j.find("privacy"); it != j.end()) {
        get_opt(*it, "eps_high", c.privacy.eps_high);
        get_opt(*it, "eps_low", c.privacy.eps_low);
        get_opt(*it, "delta", c.privacy.delta);
        get_opt(*it, "R", c.privacy.R);
        get_opt(*it, "trusted_neighbors", c.privacy.trusted_neighbors);
        get_opt(*it, "eps", c.privacy.eps);
    }
    if (auto it = j.find("data"); it != j.end()) {
        get_opt(*it, "d", c.data.d);
        get_opt(*it, "distribution", c.data.distribution);
    }
    if (auto it = j.find("optimizer"); it != j.end()) {
        get_opt(*it, "K", c.optimizer.K);
        get_opt(*it, "L1", c.optimizer.L1);
        get_opt(*it, "L2", c.optimizer.L2);
        get_opt(*it, "bisection_tol", c.optimizer.bisection_tol);
        get_opt(*it, "unbiased_tol", c.optimizer.unbiased_tol);
    }
    if (auto it = j.find("trust_sweep"); it != j.end()) {
        get_opt(*it, "k_values", c.trust_sweep.k_values);
        get_opt(*it, "empirical_trials", c.trust_sweep.empirical_trials);
    }
    if (auto it = j.find("good_nodes_sweep"); it != j.end()) {
        get_opt(*it, "p_good", c.good_nodes.p_good);
        get_opt(*it, "p_bad", c.good_nodes.p_bad);
        get_opt(*it, "num_good_values", c.good_nodes.num_good_values);
    }
    get_opt(j, "trials", c.trials);
    get_opt(j, "master_seed", c.master_seed);
    get_opt(j, "threads", c.threads);
    get_opt(j, "output", c.output);
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

// =======================================================================
// Instance construction
// =======================================================================

inline Matrix to_matrix(const Rows& rows, int n, const char* what)
{
    if (static_cast<int>(rows.size()) != n) throw std::invalid_argument(std::string(what) + " must have n rows");
    Matrix M(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n) throw std::invalid_argument(std::string(what) + " must be n x n");
        for (int j = 0; j < n; ++j) M(i, j) = rows[i][j];
    }
    return M;
}

inline Rows to_rows(const Matrix& M)
{
    Rows r(M.rows(), std::vector<double>(M.cols()));
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) r[i][j] = M(i, j);
    }
    return r;
}

/// k trusted neighbours of node i in ring order: ceil(k/2) above, floor(k/2) below.
inline std::vector<int> ring_neighbors(int i, int k, int n)
{
    if (k < 0 || k > n - 1) throw std::invalid_argument("trusted neighbor count must lie in [0, n-1]");
    std::vector<int> out;
    const int up = (k + 1) / 2;
    const int down = k / 2;
    for (int s = 1; s <= up; ++s) out.push_back((i + s) % n);
    for (int s = 1; s <= down; ++s) out.push_back(((i - s) % n + n) % n);
    return out;
}

/// eps_ij = eps_high for i's k ring neighbours and for j = i, eps_low otherwise.
inline PrivacySpec ring_trust_spec(int n, int k, const PrivacyParams& pp)
{
    PrivacySpec spec = PrivacySpec::uniform(n, pp.R, pp.eps_low, pp.delta);
    for (int i = 0; i < n; ++i) {
        spec.eps(i, i) = pp.eps_high;
        for (int j : ring_neighbors(i, k, n)) spec.eps(i, j) = pp.eps_high;
    }
    return spec;
}

inline NetworkModel build_model(const NetworkParams& np, const std::vector<double>& p)
{
    const int n = np.n;
    Vector pv = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
    NetworkModel model = np.P.empty() ? erdos_renyi_model(n, np.p_c, pv)
                                      : NetworkModel::with_independent_links(pv, to_matrix(np.P, n, "network.P"));
    if (!np.E.empty()) model.E = to_matrix(np.E, n, "network.E");
    require_valid(model);
    return model;
}

inline NetworkModel build_model(const ExperimentConfig& c) { return build_model(c.network, c.network.p); }

/// Budgets for a custom run: the explicit matrix when given, else ring trust.
inline PrivacySpec build_privacy(const ExperimentConfig& c)
{
    const int n = c.network.n;
    if (c.privacy.eps.empty()) return ring_trust_spec(n, c.privacy.trusted_neighbors, c.privacy);
    PrivacySpec spec = PrivacySpec::uniform(n, c.privacy.R, 0.0, c.privacy.delta);
    spec.eps = to_matrix(c.privacy.eps, n, "privacy.eps");
    return spec;
}

/// Heavy-tailed vectors: N(0,1) coordinates cubed, then scaled to norm R.
template <class URBG>
DataSet generate_heavy_tailed_data(int n, int d, double R, URBG& rng)
{
    if (d < 1) throw std::invalid_argument("d must be >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    DataSet ds;
    for (int i = 0; i < n; ++i) {
        Vector v(d);
        double norm = 0.0;
        do {
            for (int k = 0; k < d; ++k) {
                const double z = normal(rng);
                v(k) = z * z * z;
            }
            norm = v.norm();
        } while (norm == 0.0);
        ds.x.push_back(v * (R / norm));
    }
    return ds;
}

template <class URBG>
DataSet generate_gaussian_data(int n, int d, double R, URBG& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    DataSet ds;
    for (int i = 0; i < n; ++i) {
        Vector v(d);
        for (int k = 0; k < d; ++k) v(k) = normal(rng);
        ds.x.push_back(v * (R / v.norm()));
    }
    return ds;
}

inline constexpr std::uint64_t data_stream_tag = 0xDA7A5EEDULL;

inline DataSet generate_data(const ExperimentConfig& c, int n)
{
    auto rng = make_stream(c.master_seed, data_stream_tag);
    if (c.data.distribution == "gaussian") return generate_gaussian_data(n, c.data.d, c.privacy.R, rng);
    return generate_heavy_tailed_data(n, c.data.d, c.privacy.R, rng);
}

// =======================================================================
// Sweeps
// =======================================================================

struct TrustSweepRow
{
    int k_trusted = 0;
    double objective = 0.0;
    double sigma = 0.0;
    bool feasible = false;
    std::optional<double> empirical_mse;
    std::string error;
};

struct GoodNodesRow
{
    int num_good = 0;
    double mse_pricer = 0.0;
    double mse_pricer_stderr = 0.0;
    double mse_naive = 0.0;
    double mse_naive_stderr = 0.0;
    int trials = 0;
    std::uint64_t seed = 0;
    bool feasible = false;
    std::string error;
};

namespace detail {

inline std::string solution_error(const NetworkModel& model, const PrivacySpec& spec, const WeightSolution& sol)
{
    const auto report = check_solution(model, spec, sol);
    return report.empty() ? std::string{} : "invariant violated: " + report.front().message;
}

} // namespace detail

/// Optimized objective as node trust widens from k = 0 to the configured maximum.
/// The optional empirical column seeds each point from (master_seed, k).
inline std::vector<TrustSweepRow> run_trust_sweep(const ExperimentConfig& c)
{
    c.validate();
    const NetworkModel model = build_model(c);
    const int n = c.network.n;
    std::vector<TrustSweepRow> rows;
    for (std::size_t idx = 0; idx < c.trust_sweep.k_values.size(); ++idx) {
        TrustSweepRow row;
        row.k_trusted = c.trust_sweep.k_values[idx];
        try {
            const PrivacySpec spec = ring_trust_spec(n, row.k_trusted, c.privacy);
            const auto res = optimize(model, spec, c.data.d, c.optimizer.to_config());
            row.objective = res.objective();
            row.sigma = res.solution.sigma;
            row.error = detail::solution_error(model, spec, res.solution);
            row.feasible = row.error.empty();
            if (row.feasible && c.trust_sweep.empirical_trials > 0) {
                const DataSet data = generate_data(c, n);
                MonteCarloOptions mo;
                mo.trials = static_cast<std::size_t>(c.trust_sweep.empirical_trials);
                mo.master_seed = derive_seed(c.master_seed, static_cast<std::uint64_t>(row.k_trusted));
                mo.threads = c.threads;
                mo.norm_bound = c.privacy.R;
                row.empirical_mse = run_monte_carlo(model, data, res.solution.A, res.solution.sigma, mo).mse_pricer;
            }
        } catch (const std::exception& e) {
            row.feasible = false;
            row.error = e.what();
        }
        rows.push_back(row);
    }
    return rows;
}

/// Empirical PriCER and naive MSE as the number of well-connected nodes grows.
/// Each point is seeded from (master_seed, num_good), so a row does not
/// depend on which other points the sweep lists.
inline std::vector<GoodNodesRow> run_good_nodes_sweep(const ExperimentConfig& c)
{
    c.validate();
    const int n = c.network.n;
    const DataSet data = generate_data(c, n);
    std::vector<GoodNodesRow> rows;
    for (std::size_t idx = 0; idx < c.good_nodes.num_good_values.size(); ++idx) {
        GoodNodesRow row;
        row.num_good = c.good_nodes.num_good_values[idx];
        row.trials = c.trials;
        row.seed = derive_seed(c.master_seed, static_cast<std::uint64_t>(row.num_good));
        try {
            if (row.num_good < 0 || row.num_good > n) throw std::invalid_argument("num_good outside [0, n]");
            std::vector<double> p(n, c.good_nodes.p_bad);
            for (int i = 0; i < row.num_good; ++i) p[i] = c.good_nodes.p_good;
            const NetworkModel model = build_model(c.network, p);
            const PrivacySpec spec = ring_trust_spec(n, c.privacy.trusted_neighbors, c.privacy);
            const auto res = optimize(model, spec, c.data.d, c.optimizer.to_config());
            row.error = detail::solution_error(model, spec, res.solution);
            row.feasible = row.error.empty();
            if (row.feasible) {
                MonteCarloOptions mo;
                mo.trials = static_cast<std::size_t>(c.trials);
                mo.master_seed = row.seed;
                mo.threads = c.threads;
                mo.norm_bound = c.privacy.R;
                const auto mc = run_monte_carlo(model, data, res.solution.A, res.solution.sigma, mo);
                row.mse_pricer = mc.mse_pricer;
                row.mse_pricer_stderr = mc.mse_pricer_stderr;
                row.mse_naive = mc.mse_naive;
                row.mse_naive_stderr = mc.mse_naive_stderr;
            }
        } catch (const std::exception& e) {
            row.feasible = false;
            row.error = e.what();
        }
        rows.push_back(row);
    }
    return rows;
}

// =======================================================================
// Output
// =======================================================================

/// Shortest representation that round-trips to the same double.
inline std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct Table
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline Table to_table(const std::vector<TrustSweepRow>& rows, bool with_empirical)
{
    Table t;
    t.header = {"k_trusted", "objective", "sigma", "feasible"};
    if (with_empirical) t.header.push_back("empirical_mse");
    for (const auto& r : rows) {
        std::vector<std::string> cells{std::to_string(r.k_trusted),
                                       r.feasible ? format_number(r.objective) : "error",
                                       r.feasible ? format_number(r.sigma) : "error",
                                       r.feasible ? "1" : "0"};
        if (with_empirical) cells.push_back(r.empirical_mse ? format_number(*r.empirical_mse) : "");
        t.rows.push_back(std::move(cells));
    }
    return t;
}

inline Table to_table(const std::vector<GoodNodesRow>& rows)
{
    Table t;
    t.header = {"num_good", "mse_pricer", "mse_pricer_stderr", "mse_naive", "mse_naive_stderr", "trials", "seed"};
    for (const auto& r : rows) {
        auto num = [&](double v) { return r.feasible ? format_number(v) : std::string("error"); };
        t.rows.push_back({std::to_string(r.num_good), num(r.mse_pricer), num(r.mse_pricer_stderr),
                          num(r.mse_naive), num(r.mse_naive_stderr), std::to_string(r.trials),
                          std::to_string(r.seed)});
    }
    return t;
}

inline std::string to_csv(const Table& t)
{
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) os << (k ? "," : "") << cells[k];
        os << '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>_summary.json`; the summary
/// embeds the fully resolved config and any per-row errors.
inline void emit_results(const Table& table, const ExperimentConfig& config, const std::filesystem::path& dir,
                         const std::string& stem, const json& extra = json::object())
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    write_file(dir / (stem + ".csv"), to_csv(table));
    json summary{{"config", to_json(config)}, {"columns", table.header}, {"rows", table.rows}};
    for (auto it = extra.begin(); it != extra.end(); ++it) summary[it.key()] = it.value();
    write_file(dir / (stem + "_summary.json"), summary.dump(2) + "\n");
}

} // namespace pricer::experiments
