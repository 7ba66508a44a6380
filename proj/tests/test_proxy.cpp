#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gpdyn/proxy.hpp"
#include "gpdyn/statistics.hpp"

using namespace gpdyn;

namespace {

ProxySpec spec(ProxyVariant v, double sf, double sw = 1.0, Index steps = 50)
{
    ProxySpec s;
    s.variant = v;
    s.sigma_f = sf;
    s.sigma_w = sw;
    s.steps = steps;
    return s;
}

void expect_matches_closed_form(const ProxySpec & s, std::size_t samples, std::uint64_t seed)
{
    const auto batch = proxy_simulate(s, samples, seed);
    const auto stats = empirical_moments(batch);
    const auto exact = proxy_moments_closed_form(s);
    for (Index k = 1; k <= s.steps; ++k) {
        const auto & st = stats[static_cast<std::size_t>(k)];
        const auto & ex = exact[static_cast<std::size_t>(k)];
        EXPECT_LE(std::abs(st.mean(0) - ex.mean), 3.0 * st.mean_stderr(0)) << to_string(s.variant) << " step " << k;
        EXPECT_LE(std::abs(st.covariance(0, 0) - ex.variance), 0.05 * ex.variance)
            << to_string(s.variant) << " step " << k;
    }
}

} // namespace

TEST(ProxyClosedForm, InitialStepIsDeterministic)
{
    for (auto v : {ProxyVariant::ConstantOffset, ProxyVariant::AdditiveNoise, ProxyVariant::UncertainGain,
                   ProxyVariant::MultiplicativeNoise}) {
        auto s = spec(v, 0.3);
        s.x0 = 2.5;
        const auto m = proxy_moments_closed_form(s);
        EXPECT_EQ(m[0].mean, 2.5);
        EXPECT_EQ(m[0].variance, 0.0);
    }
}

TEST(ProxyClosedForm, OffsetVariantsAgreeWithoutParameterUncertainty)
{
    const auto a = proxy_moments_closed_form(spec(ProxyVariant::ConstantOffset, 0.0));
    const auto b = proxy_moments_closed_form(spec(ProxyVariant::AdditiveNoise, 0.0));
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_DOUBLE_EQ(a[k].mean, b[k].mean);
        EXPECT_NEAR(a[k].variance, b[k].variance, 1e-12 * (1.0 + b[k].variance));
    }
}

TEST(ProxyClosedForm, ConstantOffsetSpreadsMore)
{
    // Direct sums evaluated independently of the implementation.
    const auto a = proxy_moments_closed_form(spec(ProxyVariant::ConstantOffset, 1.0));
    const auto b = proxy_moments_closed_form(spec(ProxyVariant::AdditiveNoise, 1.0));
    EXPECT_NEAR(a[50].variance, 351.00791834655394, 1e-9);
    EXPECT_NEAR(b[50].variance, 20.39137375958287, 1e-10);
    EXPECT_GT(a[50].variance, b[50].variance);
}

TEST(ProxyClosedForm, UncertainGainMatchesQuadrature)
{
    // Reference values from 120-point Gauss-Hermite quadrature over the gain.
    const auto m = proxy_moments_closed_form(spec(ProxyVariant::UncertainGain, 0.05));
    EXPECT_NEAR(m[1].mean, 0.95, 1e-14);
    EXPECT_NEAR(m[1].variance, 1.0025, 1e-12);
    EXPECT_NEAR(m[10].mean, 0.6763064177242185, 1e-12);
    EXPECT_NEAR(m[10].variance, 7.495508681880512, 1e-10);
    EXPECT_NEAR(m[50].mean, 1.5723110931774456, 1e-9);
    EXPECT_NEAR(m[50].variance / 1579.0932514823614, 1.0, 1e-10);
}

TEST(ProxyClosedForm, MultiplicativeNoiseMatchesDirectProduct)
{
    const auto m = proxy_moments_closed_form(spec(ProxyVariant::MultiplicativeNoise, 0.05));
    EXPECT_NEAR(m[10].mean, 0.5987369392383787, 1e-14);
    EXPECT_NEAR(m[10].variance, 0.010055062425009587, 1e-15);
    EXPECT_NEAR(m[50].variance, 0.0008782190331798872, 1e-15);
}

TEST(ProxyClosedForm, RawMomentsMatchMonteCarlo)
{
    const double a = 0.95, sigma = 0.05;
    const auto m = shifted_gaussian_raw_moments(a, sigma, 10);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal(a, sigma);
    double acc = 0.0;
    const int draws = 1000000;
    for (int i = 0; i < draws; ++i)
        acc += std::pow(normal(rng), 10);
    EXPECT_NEAR(acc / draws / m[10], 1.0, 0.01);
}

TEST(ProxySimulate, NoUncertaintyIsDeterministic)
{
    for (auto v : {ProxyVariant::ConstantOffset, ProxyVariant::AdditiveNoise, ProxyVariant::UncertainGain,
                   ProxyVariant::MultiplicativeNoise}) {
        const auto batch = proxy_simulate(spec(v, 0.0, 0.0, 20), 3, 1);
        for (const auto & s : batch.states)
            for (Index k = 0; k <= 20; ++k)
                EXPECT_NEAR(s(0, k), std::pow(0.95, static_cast<double>(k)), 1e-15);
    }
}

TEST(ProxySimulate, MultiplicativeNoiseAtOrigin)
{
    auto s = spec(ProxyVariant::MultiplicativeNoise, 0.3, 1.0, 30);
    s.x0 = 0.0;
    const auto batch = proxy_simulate(s, 50, 4);
    for (const auto & st : batch.states)
        EXPECT_TRUE(st.isZero());
}

TEST(ProxySimulate, MatchesClosedFormAllVariants)
{
    expect_matches_closed_form(spec(ProxyVariant::ConstantOffset, 1.0), 20000, 101);
    expect_matches_closed_form(spec(ProxyVariant::AdditiveNoise, 1.0), 20000, 102);
    // A small gain uncertainty keeps the variance estimator's own spread
    // below the tolerance over 50 steps.
    expect_matches_closed_form(spec(ProxyVariant::UncertainGain, 0.02), 20000, 103);
    expect_matches_closed_form(spec(ProxyVariant::MultiplicativeNoise, 0.05, 0.0), 20000, 104);
}

TEST(ProxySimulate, SameSeedSameBatch)
{
    const auto s = spec(ProxyVariant::UncertainGain, 0.1, 1.0, 10);
    const auto a = proxy_simulate(s, 100, 5);
    const auto b = proxy_simulate(s, 100, 5, 1);
    for (std::size_t i = 0; i < a.samples(); ++i)
        EXPECT_TRUE((a.states[i].array() == b.states[i].array()).all());
    EXPECT_EQ(a.method, MethodTag::ProxyReference);
}

TEST(EmpiricalMoments, IdenticalTrajectories)
{
    TrajectoryBatch batch;
    batch.state_dim = 1;
    batch.horizon = 2;
    batch.states.assign(5, Eigen::MatrixXd::Constant(1, 3, 1.5));
    const auto stats = empirical_moments(batch);
    for (const auto & st : stats) {
        EXPECT_EQ(st.covariance(0, 0), 0.0);
        EXPECT_EQ(st.mean(0), 1.5);
    }
}

TEST(EmpiricalMoments, TwoTrajectoriesHandComputed)
{
    TrajectoryBatch batch;
    batch.state_dim = 1;
    batch.horizon = 0;
    batch.states = {Eigen::MatrixXd::Constant(1, 1, 0.0), Eigen::MatrixXd::Constant(1, 1, 2.0)};
    const auto stats = empirical_moments(batch);
    EXPECT_DOUBLE_EQ(stats[0].mean(0), 1.0);
    EXPECT_DOUBLE_EQ(stats[0].covariance(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(stats[0].mean_stderr(0), 1.0);
}

TEST(EmpiricalMoments, AdditiveNoiseProxyWithinStandardErrors)
{
    const auto s = spec(ProxyVariant::AdditiveNoise, 1.0, 1.0, 50);
    const auto stats = empirical_moments(proxy_simulate(s, 20000, 77));
    const auto exact = proxy_moments_closed_form(s);
    for (std::size_t k = 1; k < exact.size(); ++k) {
        EXPECT_LE(std::abs(stats[k].mean(0) - exact[k].mean), 3 * stats[k].mean_stderr(0));
        EXPECT_LE(std::abs(stats[k].covariance(0, 0) - exact[k].variance), 3 * stats[k].variance_stderr(0));
    }
}

TEST(EmpiricalMoments, InsufficientSamples)
{
    TrajectoryBatch batch;
    batch.state_dim = 1;
    batch.horizon = 1;
    batch.states = {Eigen::MatrixXd::Zero(1, 2)};
    EXPECT_THROW(empirical_moments(batch), InsufficientSamples);
}
