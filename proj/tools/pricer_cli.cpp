#include <pricer/pricer.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace pricer;
using namespace pricer::experiments;

struct CommonOptions
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> trials;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
    cmd->add_option("--out", o.out, "output directory (overrides the config)");
    cmd->add_option("--trials", o.trials, "Monte-Carlo trials (overrides the config)")->check(CLI::PositiveNumber);
    cmd->add_option("--threads", o.threads, "worker threads for Monte-Carlo trials")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const CommonOptions& o, std::optional<Kind> kind)
{
    json j = json::object();
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        j = json::parse(in);
    }
    if (o.seed) j["master_seed"] = *o.seed;
    if (kind) j["experiment"] = to_string(*kind);
    if (o.trials) j["trials"] = *o.trials;
    if (o.threads) j["threads"] = *o.threads;
    if (o.out) j["output"] = *o.out;
    return config_from_json(j);
}

json matrix_json(const Matrix& M) { return to_rows(M); }

json solution_json(const OptimizationResult& r, const NetworkModel& model, const PrivacySpec& spec)
{
    json violations = json::array();
    for (const auto& v : check_solution(model, spec, r.solution)) violations.push_back(v.message);
    return json{{"A", matrix_json(r.solution.A)},
                {"sigma", r.solution.sigma},
                {"sigma_threshold", r.sigma_threshold},
                {"objective", r.objective()},
                {"objective_trace", r.objective_trace},
                {"bracket_expansions", r.bracket_expansions},
                {"violations", violations}};
}

int report_rows(const std::vector<std::string>& errors, const std::string& label)
{
    int failed = 0;
    for (std::size_t k = 0; k < errors.size(); ++k) {
        if (errors[k].empty()) continue;
        ++failed;
        std::cerr << label << " point " << k << ": " << errors[k] << '\n';
    }
    return failed == 0 ? 0 : 1;
}

int cmd_trust_sweep(const CommonOptions& o)
{
    const auto c = resolve(o, Kind::trust_sweep);
    const auto rows = run_trust_sweep(c);
    std::vector<std::string> errors;
    json errs = json::array();
    for (const auto& r : rows) {
        errors.push_back(r.error);
        errs.push_back(r.error);
    }
    emit_results(to_table(rows, c.trust_sweep.empirical_trials > 0), c, c.output, "trust_sweep",
                 json{{"errors", errs}});
    std::cout << to_csv(to_table(rows, c.trust_sweep.empirical_trials > 0));
    return report_rows(errors, "trust-sweep");
}

int cmd_good_nodes(const CommonOptions& o)
{
    const auto c = resolve(o, Kind::good_nodes_sweep);
    const auto rows = run_good_nodes_sweep(c);
    std::vector<std::string> errors;
    json errs = json::array();
    for (const auto& r : rows) {
        errors.push_back(r.error);
        errs.push_back(r.error);
    }
    emit_results(to_table(rows), c, c.output, "good_nodes_sweep", json{{"errors", errs}});
    std::cout << to_csv(to_table(rows));
    return report_rows(errors, "good-nodes-sweep");
}

int cmd_optimize(const CommonOptions& o)
{
    const auto c = resolve(o, std::nullopt);
    const auto model = build_model(c);
    const auto spec = build_privacy(c);
    const auto r = optimize(model, spec, c.data.d, c.optimizer.to_config());
    json out = solution_json(r, model, spec);
    out["config"] = to_json(c);
    std::filesystem::create_directories(c.output);
    write_file(std::filesystem::path(c.output) / "solution.json", out.dump(2) + "\n");
    std::cout << "objective " << format_number(r.objective()) << " sigma " << format_number(r.solution.sigma)
              << '\n';
    return out["violations"].empty() ? 0 : 1;
}

int cmd_simulate(const CommonOptions& o, const std::string& solution_path)
{
    const auto c = resolve(o, std::nullopt);
    const auto model = build_model(c);
    const auto spec = build_privacy(c);
    const auto n = model.size();

    WeightSolution sol;
    if (solution_path.empty()) {
        sol = optimize(model, spec, c.data.d, c.optimizer.to_config()).solution;
    } else {
        std::ifstream in(solution_path);
        if (!in) throw std::runtime_error("cannot open solution " + solution_path);
        const json j = json::parse(in);
        sol.A = to_matrix(j.at("A").get<Rows>(), static_cast<int>(n), "solution A");
        sol.sigma = j.at("sigma").get<double>();
    }
    if (const auto report = check_solution(model, spec, sol); !report.empty()) {
        throw std::runtime_error("solution violates an invariant: " + report.front().message);
    }

    const DataSet data = generate_data(c, static_cast<int>(n));
    MonteCarloOptions mo;
    mo.trials = static_cast<std::size_t>(c.trials);
    mo.master_seed = c.master_seed;
    mo.threads = c.threads;
    mo.norm_bound = c.privacy.R;
    const auto mc = run_monte_carlo(model, data, sol.A, sol.sigma, mo);
    const auto bound = mse_upper_bound(model, sol.A, sol.sigma, c.data.d, c.privacy.R);

    Table t;
    t.header = {"trials", "seed", "mse_pricer", "mse_pricer_stderr", "mse_naive", "mse_naive_stderr",
                "mse_bound"};
    t.rows.push_back({std::to_string(mc.trials), std::to_string(c.master_seed), format_number(mc.mse_pricer),
                      format_number(mc.mse_pricer_stderr), format_number(mc.mse_naive),
                      format_number(mc.mse_naive_stderr), format_number(bound.total)});
    emit_results(t, c, c.output, "simulate", json{{"sigma", sol.sigma}, {"A", matrix_json(sol.A)}});
    std::cout << to_csv(t);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"PriCER private collaborative mean estimation experiments"};
    app.require_subcommand(1);

    CommonOptions trust_opts, good_opts, opt_opts, sim_opts;
    std::string solution_path;
    auto* trust = app.add_subcommand("trust-sweep", "optimized objective versus trusted neighbour count");
    auto* good = app.add_subcommand("good-nodes-sweep", "PriCER versus naive MSE as good nodes are added");
    auto* opt = app.add_subcommand("optimize", "optimize weights and noise, write solution.json");
    auto* sim = app.add_subcommand("simulate", "Monte-Carlo MSE of a solution");
    add_common(trust, trust_opts);
    add_common(good, good_opts);
    add_common(opt, opt_opts);
    add_common(sim, sim_opts);
    sim->add_option("--solution", solution_path, "solution.json from the optimize command")
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (trust->parsed()) return cmd_trust_sweep(trust_opts);
        if (good->parsed()) return cmd_good_nodes(good_opts);
        if (opt->parsed()) return cmd_optimize(opt_opts);
        if (sim->parsed()) return cmd_simulate(sim_opts, solution_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
