#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ergodic/loess.hpp"
#include "oracles.hpp"

using namespace ergodic;

// ---- oracle agreement ----

TEST(Loess, MatchesBruteForceOracleOnRandomInstances)
{
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto in = oracle::random_loess_instance(seed);
        LoessOptions opt;
        opt.span = in.span;
        opt.robust_iterations = in.robust_iterations;
        const auto fit = loess_fit(in.x, in.y, opt);
        const auto ref = oracle::brute_force_loess(in.x, in.y, in.span, in.robust_iterations);
        ASSERT_EQ(fit.abscissae().size(), ref.x.size()) << "instance " << seed;
        for (std::size_t i = 0; i < ref.x.size(); ++i) {
            ASSERT_EQ(fit.abscissae()[i], ref.x[i]);
            worst = std::max(worst, std::abs(fit.fitted()[i] - ref.fitted[i]));
        }
    }
    EXPECT_LE(worst, 1e-10);
}

TEST(Loess, NoisyQuadraticAtDefaultSpan)
{
    std::mt19937_64 rng(77);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<double> x, y;
    for (int i = 0; i < 300; ++i) {
        x.push_back(-1.0 + 2.0 * i / 299.0);
        y.push_back(x.back() * x.back() + noise(rng));
    }
    const auto fit = loess_fit(x, y);
    const auto ref = oracle::brute_force_loess(x, y, 0.3, 2);
    for (std::size_t i = 0; i < ref.x.size(); ++i)
        EXPECT_NEAR(fit.fitted()[i], ref.fitted[i], 1e-10);
}

// ---- exact reproduction ----

TEST(Loess, ReproducesLinearData)
{
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
        x.push_back(0.37 * i * i / 40.0);
        y.push_back(2.0 * x.back() + 1.0);
    }
    for (double span : {0.1, 0.3, 1.0}) {
        LoessOptions opt;
        opt.span = span;
        opt.robust_iterations = 0;
        const auto fit = loess_fit(x, y, opt);
        for (std::size_t i = 0; i < x.size(); ++i)
            EXPECT_NEAR(fit(x[i]), 2.0 * x[i] + 1.0, 1e-12) << "span " << span;
    }
}

TEST(Loess, ConstantDataStaysConstant)
{
    std::vector<double> x, y;
    for (int i = 0; i < 25; ++i) {
        x.push_back(std::sqrt(static_cast<double>(i)));
        y.push_back(-3.5);
    }
    const auto fit = loess_fit(x, y);
    for (double v : fit.fitted())
        EXPECT_NEAR(v, -3.5, 1e-14);
}

TEST(Loess, DegenerateWindowFallsBackToWeightedMean)
{
    // Nine samples at x=0 swamp a span-0.3 window there.
    std::vector<double> x(9, 0.0), y;
    for (int i = 0; i < 9; ++i)
        y.push_back(i);
    for (int i = 1; i <= 21; ++i) {
        x.push_back(i);
        y.push_back(100.0);
    }
    LoessOptions opt;
    opt.robust_iterations = 0;
    const auto fit = loess_fit(x, y, opt);
    EXPECT_DOUBLE_EQ(fit(0.0), 4.0);
}

// ---- interpolation and options ----

TEST(Loess, InterpolatesBetweenFitPoints)
{
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> y{0.0, 1.0, 4.0, 9.0};
    LoessOptions opt;
    opt.span = 1.0;
    opt.robust_iterations = 0;
    const auto fit = loess_fit(x, y, opt);
    EXPECT_NEAR(fit(1.5), 0.5 * (fit(1.0) + fit(2.0)), 1e-14);
    EXPECT_DOUBLE_EQ(fit(-5.0), fit(0.0));
    EXPECT_DOUBLE_EQ(fit(50.0), fit(3.0));
}

TEST(Loess, DeltaSkipsNearbyAbscissae)
{
    std::vector<double> x, y;
    for (int i = 0; i < 200; ++i) {
        x.push_back(i / 199.0);
        y.push_back(std::sin(3.0 * x.back()));
    }
    LoessOptions opt;
    opt.delta = 0.05;
    const auto coarse = loess_fit(x, y, opt);
    EXPECT_LT(coarse.abscissae().size(), 40u);
    EXPECT_EQ(coarse.abscissae().back(), 1.0);
    opt.delta = 0.0;
    const auto full = loess_fit(x, y, opt);
    EXPECT_EQ(full.abscissae().size(), 200u);
    for (double q : {0.1, 0.5, 0.9})
        EXPECT_NEAR(coarse(q), full(q), 5e-3);
}

TEST(Loess, NeighbourCountRoundsUp)
{
    EXPECT_EQ(loess_neighbor_count(10, 0.3), 3u);
    EXPECT_EQ(loess_neighbor_count(11, 0.3), 4u);
    EXPECT_EQ(loess_neighbor_count(5, 0.1), 3u);
    EXPECT_EQ(loess_neighbor_count(4, 1.0), 4u);
}

TEST(Loess, RejectsBadInput)
{
    const std::vector<double> x{0.0, 1.0}, y{0.0, 1.0};
    EXPECT_THROW(loess_fit(x, y), EmptySampleError);
    const std::vector<double> x3{0.0, 1.0, 2.0}, y2{0.0, 1.0};
    EXPECT_THROW(loess_fit(x3, y2), DomainError);
    LoessOptions opt;
    opt.span = 0.0;
    const std::vector<double> y3{1.0, 2.0, 3.0};
    EXPECT_THROW(loess_fit(x3, y3, opt), DomainError);
    const std::vector<double> ynan{1.0, std::nan(""), 3.0};
    EXPECT_THROW(loess_fit(x3, ynan), DomainError);
}

TEST(Loess, RobustPassesDownweightOutliers)
{
    std::vector<double> x, y;
    for (int i = 0; i < 60; ++i) {
        x.push_back(i);
        y.push_back(i % 10 == 5 ? 50.0 : 1.0);
    }
    LoessOptions plain;
    plain.robust_iterations = 0;
    LoessOptions robust;
    robust.robust_iterations = 3;
    EXPECT_GT(std::abs(loess_fit(x, y, plain)(25.0) - 1.0), 1.0);
    EXPECT_LT(std::abs(loess_fit(x, y, robust)(25.0) - 1.0), 0.1);
}
