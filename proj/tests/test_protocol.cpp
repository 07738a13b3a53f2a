#include "support.hpp"

#include <gtest/gtest.h>

namespace pricer {
namespace {

LinkRealization all_up(std::size_t n)
{
    LinkRealization r;
    r.tau_ps.assign(n, 1);
    r.tau_nn.assign(n * n, 1);
    return r;
}

DataSet random_data(std::size_t n, Eigen::Index d, Rng& rng)
{
    DataSet data;
    for (std::size_t i = 0; i < n; ++i) {
        Vector v(d);
        for (Eigen::Index k = 0; k < d; ++k) v(k) = testing::uniform(rng, -1.0, 1.0);
        data.x.push_back(v / std::max(1.0, v.norm()));
    }
    return data;
}

TEST(Stage1, IdentityWithoutNoiseKeepsData)
{
    Rng rng(1);
    const auto data = random_data(3, 4, rng);
    const auto local = stage1_local_aggregate(data, Matrix::Identity(3, 3), 0.0, all_up(3), rng);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(local[i], data.x[i]);
}

TEST(Stage1, AllOnesSumsEverything)
{
    Rng rng(2);
    const auto data = random_data(2, 4, rng);
    const auto local = stage1_local_aggregate(data, Matrix::Ones(2, 2), 0.0, all_up(2), rng);
    EXPECT_TRUE(local[0].isApprox(data.x[0] + data.x[1]));
    EXPECT_TRUE(local[1].isApprox(data.x[0] + data.x[1]));
}

TEST(Stage1, SingleNodeScaling)
{
    Rng rng(3);
    const auto data = random_data(1, 4, rng);
    const auto local = stage1_local_aggregate(data, Matrix::Constant(1, 1, 2.0), 0.0, all_up(1), rng);
    EXPECT_EQ(local[0], 2.0 * data.x[0]);
}

TEST(Stage2, AveragesByNodeCount)
{
    Vector v(2);
    v << 1.0, -3.0;
    EXPECT_TRUE(stage2_global_aggregate({v, v}, {0, 0}, 2).isZero(0.0));
    EXPECT_EQ(stage2_global_aggregate({v}, {1}, 1), v);
    EXPECT_EQ(stage2_global_aggregate({v, 7.0 * v}, {1, 0}, 2), v / 2.0);
}

TEST(Naive, AllUpIsExactAllDownIsZero)
{
    Rng rng(4);
    const auto data = random_data(4, 3, rng);
    EXPECT_TRUE(naive_estimate(data, {1, 1, 1, 1}).isApprox(data.mean()));
    const Vector zero = naive_estimate(data, {0, 0, 0, 0});
    EXPECT_TRUE(zero.isZero(0.0));
    EXPECT_DOUBLE_EQ((zero - data.mean()).squaredNorm(), data.mean().squaredNorm());
}

TEST(Naive, SingleNodeTwoOutcomeMse)
{
    // Up with probability 0.5 gives zero error, down gives ||x||^2.
    const auto model = NetworkModel::with_independent_links(Vector::Constant(1, 0.5), Matrix::Ones(1, 1));
    const auto data = oracle::collinear_data(1, 2, 1.0);
    MonteCarloOptions opt;
    opt.trials = 100000;
    opt.master_seed = 42;
    const auto mc = run_monte_carlo(model, data, Matrix::Constant(1, 1, 2.0), 0.0, opt);
    EXPECT_NEAR(mc.mse_naive, 0.5, 5 * mc.mse_naive_stderr);
}

TEST(MonteCarlo, PerfectNetworkRecoversMeanExactly)
{
    Rng rng(5);
    const auto model = NetworkModel::with_independent_links(Vector::Ones(3), Matrix::Ones(3, 3));
    const auto data = random_data(3, 4, rng);
    Matrix A = Matrix::Constant(3, 3, 1.0 / 3.0);
    MonteCarloOptions opt;
    opt.trials = 100;
    const auto mc = run_monte_carlo(model, data, A, 0.0, opt);
    EXPECT_LE(mc.mse_pricer, 1e-30);
    EXPECT_EQ(mc.mse_naive, 0.0);
}

TEST(MonteCarlo, SingleNodeMatchesExactTiv)
{
    const auto model = NetworkModel::with_independent_links(Vector::Constant(1, 0.5), Matrix::Ones(1, 1));
    const auto data = oracle::collinear_data(1, 2, 1.0);
    MonteCarloOptions opt;
    opt.trials = 100000;
    opt.master_seed = 9;
    const auto mc = run_monte_carlo(model, data, Matrix::Constant(1, 1, 2.0), 0.0, opt);
    EXPECT_NEAR(mc.mse_pricer, 1.0, 0.05);
}

TEST(MonteCarlo, DeterministicAcrossRunsAndThreads)
{
    Rng rng(6);
    const auto model = testing::random_model(4, rng);
    const auto data = random_data(4, 3, rng);
    const auto A = testing::random_unbiased_weights(model, rng);
    MonteCarloOptions opt;
    opt.trials = 2000;
    opt.master_seed = 77;
    const auto a = run_monte_carlo(model, data, A, 0.3, opt);
    opt.threads = 3;
    const auto b = run_monte_carlo(model, data, A, 0.3, opt);
    EXPECT_EQ(a.mse_pricer, b.mse_pricer);
    EXPECT_EQ(a.mse_naive, b.mse_naive);
    EXPECT_EQ(a.mean_estimate, b.mean_estimate);
}

TEST(MonteCarlo, TrialSeedReproducesTrial)
{
    Rng rng(7);
    const auto model = testing::random_model(3, rng);
    const auto data = random_data(3, 2, rng);
    const auto A = testing::random_unbiased_weights(model, rng);
    MonteCarloOptions opt;
    opt.trials = 20;
    opt.master_seed = 5;
    opt.keep_records = true;
    const auto mc = run_monte_carlo(model, data, A, 0.5, opt);
    ASSERT_EQ(mc.records.size(), 20u);
    const auto t = detail::run_trial(model, data, data.mean(), A, 0.5, 5, 13);
    EXPECT_EQ(t.estimate, mc.records[13].estimate);
    EXPECT_EQ(t.links, mc.records[13].realization);
}

TEST(MonteCarlo, EmpiricalMseWithinBound)
{
    Rng rng(8);
    for (int t = 0; t < 5; ++t) {
        const auto model = testing::random_model(4, rng);
        const auto data = random_data(4, 3, rng);
        const auto A = testing::random_unbiased_weights(model, rng);
        MonteCarloOptions opt;
        opt.trials = 20000;
        opt.master_seed = 100 + t;
        const auto mc = run_monte_carlo(model, data, A, 0.2, opt);
        const auto bound = mse_upper_bound(model, A, 0.2, 3, 1.0);
        EXPECT_LE(mc.mse_pricer, bound.total + 5 * mc.mse_pricer_stderr);
    }
}

TEST(MonteCarlo, UnbiasedWeightsGiveUnbiasedMean)
{
    Rng rng(9);
    const auto model = testing::random_model(3, rng);
    const auto data = random_data(3, 3, rng);
    const auto A = testing::random_unbiased_weights(model, rng);
    MonteCarloOptions opt;
    opt.trials = 100000;
    opt.master_seed = 3;
    const auto mc = run_monte_carlo(model, data, A, 0.1, opt);
    const Vector truth = data.mean();
    for (Eigen::Index k = 0; k < truth.size(); ++k) {
        EXPECT_LE(std::abs(mc.mean_estimate(k) - truth(k)), 5 * mc.mean_estimate_stderr(k));
    }
}

TEST(MonteCarlo, InputChecks)
{
    Rng rng(10);
    const auto model = testing::random_model(2, rng);
    const auto data = random_data(2, 2, rng);
    MonteCarloOptions opt;
    opt.trials = 0;
    EXPECT_THROW(run_monte_carlo(model, data, Matrix::Identity(2, 2), 0.0, opt), std::invalid_argument);
    opt.trials = 1;
    opt.norm_bound = 1e-3;
    EXPECT_THROW(run_monte_carlo(model, data, Matrix::Identity(2, 2), 0.0, opt), std::invalid_argument);
}

} // namespace
} // namespace pricer
