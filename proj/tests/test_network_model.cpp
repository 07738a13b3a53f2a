#include "support.hpp"

#include <gtest/gtest.h>

namespace pricer {
namespace {

NetworkModel two_node(double p1, double p2, double p12, double p21, double e)
{
    Vector p(2);
    p << p1, p2;
    Matrix P(2, 2);
    P << 1.0, p12, p21, 1.0;
    Matrix E(2, 2);
    E << 1.0, e, e, 1.0;
    return NetworkModel{p, P, E};
}

TEST(ValidateModel, PerfectConnectivityIsValid)
{
    EXPECT_TRUE(validate_model(two_node(1, 1, 1, 1, 1)).empty());
}

TEST(ValidateModel, ReciprocityBelowIndependence)
{
    const auto report = validate_model(two_node(0.5, 0.5, 0.5, 0.5, 0.1));
    ASSERT_FALSE(report.empty());
    EXPECT_EQ(report.front().message, "E_{1,2} < p_12·p_21 = 0.25");
    EXPECT_EQ(report.front().i, 0);
    EXPECT_EQ(report.front().j, 1);
}

TEST(ValidateModel, ZeroServerProbabilityRejected)
{
    const auto report = validate_model(two_node(0.5, 0.0, 0.5, 0.5, 0.25));
    ASSERT_EQ(report.size(), 1u);
    EXPECT_EQ(report.front().message, "p_2 = 0 not allowed");
}

TEST(ValidateModel, FrechetUpperBound)
{
    // E above min(p_12, p_21) has no joint pmf even though E >= p_12 p_21.
    const auto report = validate_model(two_node(0.5, 0.5, 0.3, 0.9, 0.35));
    ASSERT_EQ(report.size(), 1u);
    EXPECT_NE(report.front().message.find("> min"), std::string::npos);
}

TEST(ValidateModel, DiagonalAndSymmetry)
{
    auto m = two_node(0.5, 0.5, 0.5, 0.5, 0.25);
    m.P(0, 0) = 0.9;
    m.E(1, 0) = 0.3;
    const auto report = validate_model(m);
    EXPECT_FALSE(report.empty());
    m.P(0, 0) = 1.0;
    EXPECT_FALSE(validate_model(m).empty());
}

TEST(SampleLinks, DegenerateLinksAlwaysUp)
{
    Rng rng(7);
    const auto m = two_node(0.3, 0.6, 1.0, 1.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
        const auto r = sample_links(m, rng);
        EXPECT_TRUE(r.link(0, 1));
        EXPECT_TRUE(r.link(1, 0));
        EXPECT_TRUE(r.link(0, 0));
        EXPECT_TRUE(r.link(1, 1));
    }
}

TEST(SampleLinks, PerfectlyCoupledPair)
{
    Rng rng(11);
    const auto m = two_node(0.5, 0.5, 0.5, 0.5, 0.5);
    int ups = 0;
    for (int t = 0; t < 10000; ++t) {
        const auto r = sample_links(m, rng);
        ASSERT_EQ(r.link(0, 1), r.link(1, 0));
        ups += r.link(0, 1);
    }
    EXPECT_GT(ups, 4500);
    EXPECT_LT(ups, 5500);
}

TEST(SampleLinks, IndependentPairIsUncorrelated)
{
    Rng rng(2024);
    const auto m = two_node(0.5, 0.5, 0.5, 0.5, 0.25);
    const int N = 100000;
    double sa = 0, sb = 0, sab = 0;
    for (int t = 0; t < N; ++t) {
        const auto r = sample_links(m, rng);
        const double a = r.link(0, 1), b = r.link(1, 0);
        sa += a;
        sb += b;
        sab += a * b;
    }
    const double ma = sa / N, mb = sb / N;
    const double cov = sab / N - ma * mb;
    const double corr = cov / std::sqrt(ma * (1 - ma) * mb * (1 - mb));
    EXPECT_NEAR(corr, 0.0, 0.02);
}

TEST(SampleLinks, MarginalsAndReciprocityMatchModel)
{
    Rng gen(5);
    const auto m = testing::random_model(4, gen);
    Rng rng(99);
    const int N = 100000;
    Matrix hits = Matrix::Zero(4, 4);
    Matrix both = Matrix::Zero(4, 4);
    Vector ps = Vector::Zero(4);
    for (int t = 0; t < N; ++t) {
        const auto r = sample_links(m, rng);
        for (int i = 0; i < 4; ++i) {
            ps(i) += r.ps(i);
            for (int j = 0; j < 4; ++j) {
                hits(i, j) += r.link(i, j);
                both(i, j) += r.link(i, j) && r.link(j, i);
            }
        }
    }
    for (int i = 0; i < 4; ++i) {
        const double pi = m.p(i);
        EXPECT_NEAR(ps(i) / N, pi, 4 * std::sqrt(pi * (1 - pi) / N));
        for (int j = 0; j < 4; ++j) {
            const double pij = m.P(i, j);
            EXPECT_NEAR(hits(i, j) / N, pij, 4 * std::sqrt(pij * (1 - pij) / N) + 1e-12);
            const double e = m.E(i, j);
            EXPECT_NEAR(both(i, j) / N, e, 4 * std::sqrt(e * (1 - e) / N) + 1e-12);
        }
    }
}

TEST(SampleLinks, DeterministicGivenSeed)
{
    Rng gen(3);
    const auto m = testing::random_model(5, gen);
    Rng a(123), b(123);
    for (int t = 0; t < 50; ++t) EXPECT_EQ(sample_links(m, a), sample_links(m, b));
}

TEST(SampleLinks, InvalidModelRejected)
{
    Rng rng(1);
    EXPECT_THROW(sample_links(two_node(0.5, 0.5, 0.5, 0.5, 0.1), rng), std::invalid_argument);
}

TEST(ErdosRenyi, OffDiagonalIsCollaborationProbability)
{
    Vector p(10);
    p << 0.1, 0.1, 0.8, 0.1, 0.1, 0.9, 0.1, 0.1, 0.9, 0.1;
    const auto m = erdos_renyi_model(10, 0.8, p);
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) EXPECT_EQ(m.P(i, j), i == j ? 1.0 : 0.8);
    }
    EXPECT_TRUE(validate_model(m).empty());
}

TEST(ErdosRenyi, ZeroCollaborationLeavesSelfLinks)
{
    const auto m = erdos_renyi_model(3, 0.0, Vector::Constant(3, 0.5));
    EXPECT_TRUE(m.P.isIdentity());
}

TEST(ErdosRenyi, IndependentReciprocityDefault)
{
    const auto m = erdos_renyi_model(2, 0.6, Vector::Constant(2, 0.5));
    EXPECT_DOUBLE_EQ(m.E(0, 1), 0.36);
    EXPECT_EQ(m.E(0, 0), 1.0);
}

TEST(ErdosRenyi, RangeChecks)
{
    EXPECT_THROW(erdos_renyi_model(2, 1.5, Vector::Constant(2, 0.5)), std::invalid_argument);
    EXPECT_THROW(erdos_renyi_model(2, 0.5, Vector::Constant(2, 0.0)), std::invalid_argument);
}

} // namespace
} // namespace pricer
