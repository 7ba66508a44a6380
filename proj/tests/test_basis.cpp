#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <Eigen/Dense>

#include "gpdyn/basis.hpp"
#include "gpdyn/gp_model.hpp"
#include "gpdyn/proxy.hpp"
#include "gpdyn/statistics.hpp"
#include "test_util.hpp"

using namespace gpdyn;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

using K = ScalarKernel<double>;
using MK = MatrixKernel<double>;

VectorXd vec(std::initializer_list<double> v)
{
    VectorXd out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v)
        out(i++) = x;
    return out;
}

MatrixXd feature_gram(const BasisExpansion & e, const MatrixXd & X)
{
    MatrixXd phi(X.cols(), e.size());
    for (Index j = 0; j < X.cols(); ++j)
        phi.row(j) = e.design(X.col(j)).row(0);
    return phi * phi.transpose();
}

MeanFn<> gain(double g) { return MeanFn<>::linear_map(MatrixXd::Constant(1, 1, g)); }

} // namespace

TEST(RandomFourier, VarianceConvergesToSigmaSquared)
{
    const auto e = rff_expansion(K::squared_exponential(1.0, 0.7), 2, 4096, 1);
    const VectorXd x = vec({0.3, -0.2});
    const VectorXd phi = e.design(x).row(0);
    EXPECT_NEAR(phi.squaredNorm(), 1.0, 0.05);
}

TEST(RandomFourier, LongLengthscaleGivesConstantFeatures)
{
    const auto e = rff_expansion(K::squared_exponential(1.0, 1e9), 1, 10, 2);
    EXPECT_LT((e.design(vec({1.0})) - e.design(vec({-1.0}))).norm(), 1e-8);
    EXPECT_EQ(e.size(), 10);
    EXPECT_EQ(e.weights.mean, VectorXd::Zero(10));
    EXPECT_EQ(e.weights.cov, MatrixXd::Identity(10, 10));
}

TEST(RandomFourier, UnbiasedKernelEstimate)
{
    const auto k = K::squared_exponential(1.0, 1.0);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<std::pair<VectorXd, VectorXd>> pairs;
    for (int i = 0; i < 10; ++i)
        pairs.emplace_back(vec({u(rng), u(rng)}), vec({u(rng), u(rng)}));
    std::vector<double> mean(10, 0.0);
    for (std::uint64_t r = 0; r < 200; ++r) {
        const auto e = rff_expansion(k, 2, 64, 42, r);
        for (std::size_t i = 0; i < 10; ++i)
            mean[i] += e.design(pairs[i].first).row(0).dot(e.design(pairs[i].second).row(0)) / 200.0;
    }
    for (std::size_t i = 0; i < 10; ++i)
        EXPECT_NEAR(mean[i] / k(pairs[i].first, pairs[i].second), 1.0, 0.02) << "pair " << i;
}

TEST(RandomFourier, RejectsNonSeKernel)
{
    EXPECT_THROW(rff_expansion(K::linear(1.0), 1, 10, 1), UnsupportedMethod);
}

TEST(Nystrom, LinearKernelIsRankOne)
{
    const MatrixXd pts = (MatrixXd(1, 5) << -2.0, -0.5, 0.1, 1.0, 3.0).finished();
    const auto e = nystrom_expansion(K::linear(1.5), pts, 1);
    const double ratio = e.design(vec({2.0}))(0, 0) / 2.0;
    EXPECT_NEAR(e.design(vec({-0.7}))(0, 0) / -0.7, ratio, 1e-12);
    EXPECT_NEAR(ratio * ratio, 1.5 * 1.5, 1e-10);
    try {
        nystrom_expansion(K::linear(1.5), pts, 2);
        FAIL() << "expected DegenerateSpectrum";
    } catch (const DegenerateSpectrum & e) {
        EXPECT_EQ(e.achievable(), 1u);
    }
}

TEST(Nystrom, FullRankReproducesGram)
{
    std::mt19937_64 rng(3);
    const MatrixXd pts = test::random_matrix(2, 8, rng);
    const auto k = K::squared_exponential(1.2, 0.8);
    const auto e = nystrom_expansion(k, pts, 8);
    const MatrixXd gram = kernel_gram(MK::scalar(k), pts);
    EXPECT_LT((feature_gram(e, pts) - gram).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Nystrom, TruncationErrorWithinSpectralBound)
{
    std::mt19937_64 rng(4);
    const MatrixXd pts = test::random_matrix(1, 30, rng);
    const auto k = K::squared_exponential(1.0, 1.0);
    const MatrixXd gram = kernel_gram(MK::scalar(k), pts);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
    const auto e = nystrom_expansion(k, pts, 4);
    const auto & ny = std::get<FeatureMap::Nystrom>(e.maps.front().kind());
    // Eigenvalues are those of the gram scaled by 1/p, in descending order.
    for (Index i = 0; i < 4; ++i)
        EXPECT_NEAR(ny.eigenvalues(i), eig.eigenvalues()(29 - i) / 30.0, 1e-12);
    for (Index i = 0; i < 4; ++i) {
        const VectorXd col = ny.projection.col(i);
        for (Index j = 0; j < col.size(); ++j)
            if (std::abs(col(j)) > 1e-12 * col.cwiseAbs().maxCoeff()) {
                EXPECT_GT(col(j), 0.0);
                break;
            }
    }
    const double bound = eig.eigenvalues().head(26).sum();
    EXPECT_LE((feature_gram(e, pts) - gram).cwiseAbs().maxCoeff(), bound);
}

TEST(LinearExact, ReproducesKernel)
{
    const auto e = linear_exact_expansion(K::linear(1.0), 1);
    EXPECT_DOUBLE_EQ(e.design(vec({2.0}))(0, 0) * e.design(vec({3.0}))(0, 0), 6.0);
    std::mt19937_64 rng(5);
    const MatrixXd pts = test::random_matrix(1, 10, rng);
    const auto k = K::linear(0.7);
    EXPECT_LT((feature_gram(linear_exact_expansion(k, 1), pts) - kernel_gram(MK::scalar(k), pts)).cwiseAbs().maxCoeff(),
              1e-15);
    EXPECT_THROW(linear_exact_expansion(K::squared_exponential(1, 1), 1), UnsupportedMethod);
}

TEST(LinearTimesBase, MultiplicativeStructure)
{
    const auto inner = rff_expansion(K::squared_exponential(1.0, 0.5), 1, 10, 7);
    const auto e = linear_times_base(inner);
    EXPECT_EQ(e.design(vec({0.0})).norm(), 0.0);
    EXPECT_EQ(e.size(), 10);

    const auto quad = linear_times_base(linear_exact_expansion(K::linear(1.0), 1));
    const double a = 1.5, b = -2.0;
    EXPECT_DOUBLE_EQ(quad.design(vec({a})).row(0).dot(quad.design(vec({b})).row(0)), a * a * b * b);
}

TEST(LinearTimesBase, MatchesProductGram)
{
    std::mt19937_64 rng(6);
    const MatrixXd pts = test::random_matrix(1, 9, rng);
    const auto se = K::squared_exponential(1.0, 0.6);
    const auto e = linear_times_base(nystrom_expansion(se, pts, 9), 0.8);
    const MatrixXd gram = kernel_gram(MK::scalar(K::product(K::linear(0.8), se)), pts);
    EXPECT_LT((feature_gram(e, pts) - gram).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ExpansionFor, ProductKernelUsesLinearTimes)
{
    BasisOptions opts;
    const auto e = expansion_for(MK::scalar(K::product(K::linear(0.3), K::squared_exponential(1.0, 0.1))), 1, opts, 9);
    ASSERT_TRUE(std::holds_alternative<FeatureMap::LinearTimes>(e.maps.front().kind()));
    EXPECT_EQ(e.size(), 10);
}

TEST(ExpansionFor, DistanceCoupledReconstruction)
{
    const auto k = MK::distance_coupled(K::squared_exponential(1.0, 1.0), 2);
    BasisOptions opts;
    opts.m = 64;
    const VectorXd x = vec({0.2, -0.1}), x2 = vec({-0.3, 0.4});
    MatrixXd avg = MatrixXd::Zero(2, 2);
    for (std::uint64_t r = 0; r < 300; ++r) {
        const auto e = expansion_for(k, 2, opts, 11, r);
        ASSERT_TRUE(e.shared);
        avg += e.design(x) * e.design(x2).transpose() / 300.0;
    }
    EXPECT_LT(test::relative_frobenius(avg, k(x, x2)), 0.03);
}

TEST(ExpansionFor, IndependentOutputsAreBlockDiagonal)
{
    const auto k = MK::independent({K::squared_exponential(1.0, 1.0), K::linear(0.5)});
    const auto e = expansion_for(k, 2, BasisOptions{}, 1);
    EXPECT_EQ(e.size(), 12);
    const MatrixXd d = e.design(vec({0.4, 0.9}));
    EXPECT_EQ(d.block(0, 10, 1, 2).norm(), 0.0);
    EXPECT_EQ(d.block(1, 0, 1, 10).norm(), 0.0);
}

TEST(ConditionWeights, NoDataIsIdentity)
{
    const auto e = rff_expansion(K::squared_exponential(1.0, 1.0), 1, 5, 1);
    const auto post = condition_weights(e, MatrixXd(1, 0), MatrixXd(1, 0), MatrixXd::Identity(1, 1));
    EXPECT_EQ(post.weights.mean, e.weights.mean);
    EXPECT_EQ(post.weights.cov, e.weights.cov);
}

TEST(ConditionWeights, UninformativeDataKeepsPrior)
{
    const auto e = linear_exact_expansion(K::linear(1.0), 1);
    const MatrixXd X = MatrixXd::Ones(1, 3), Y = MatrixXd::Constant(1, 3, 5.0);
    const auto post = condition_weights(e, X, Y, MatrixXd::Constant(1, 1, 1e6));
    EXPECT_NEAR(post.weights.cov(0, 0), 1.0, 0.01);
    EXPECT_NEAR(post.weights.mean(0), 0.0, 0.01);
}

TEST(ConditionWeights, MatchesNormalEquations)
{
    const auto e = linear_exact_expansion(K::linear(1.0), 2);
    MatrixXd X(2, 3);
    X << 1.0, 0.5, -1.0, 2.0, 0.0, 1.5;
    const MatrixXd Y = (MatrixXd(1, 3) << 1.0, -0.5, 0.25).finished();
    const double q = 0.3;
    const MatrixXd Phi = X.transpose();
    const MatrixXd cov = (MatrixXd::Identity(2, 2) + Phi.transpose() * Phi / q).inverse();
    const VectorXd mean = cov * Phi.transpose() * Y.row(0).transpose() / q;
    const auto post = condition_weights(e, X, Y, MatrixXd::Constant(1, 1, q));
    EXPECT_LT((post.weights.cov - cov).norm(), 1e-10);
    EXPECT_LT((post.weights.mean - mean).norm(), 1e-10);
}

TEST(ConditionWeights, ExactFeaturesMatchGpPosterior)
{
    MatrixXd gain_m(2, 2);
    gain_m << 0.9, 0.1, 0.0, 0.8;
    const auto kernel = MK::independent(K::linear(0.7), 2);
    const MatrixXd Q = 0.05 * MatrixXd::Identity(2, 2);
    const GpModel<> prior(MeanFn<>::zero(2), kernel, Q);
    MatrixXd X(2, 4), Y(2, 4);
    X << 0.1, 1.0, -0.5, 2.0, 0.3, -1.0, 0.7, 0.2;
    Y << 0.2, 0.6, -0.3, 1.1, 0.1, -0.8, 0.5, 0.0;
    const auto post = prior.condition(X, Y);
    const auto e = condition_weights(expansion_for(kernel, 2, BasisOptions{}, 1), X, Y, Q);
    const VectorXd z = vec({0.4, -0.6});
    EXPECT_LT((e.design(z) * e.weights.mean - post.posterior_mean(z)).norm(), 1e-10);
    const MatrixXd d = e.design(z);
    EXPECT_LT((d * e.weights.cov * d.transpose() - post.gram(z)).norm(), 1e-10);
}

TEST(FunctionSamples, ZeroCovarianceGivesMeanFunction)
{
    auto e = rff_expansion(K::squared_exponential(1.0, 1.0), 1, 6, 3);
    e.weights = GaussianDist<>(VectorXd::LinSpaced(6, -1, 1), MatrixXd::Zero(6, 6));
    for (const auto & s : draw_function_samples(e, 5, 1))
        EXPECT_NEAR((s(vec({0.3})) - e.design(vec({0.3})) * e.weights.mean).norm(), 0.0, 1e-9);
}

TEST(FunctionSamples, EmpiricalVarianceMatchesClosedForm)
{
    auto e = rff_expansion(K::squared_exponential(1.0, 1.0), 1, 8, 4);
    std::mt19937_64 rng(8);
    const MatrixXd a = test::random_matrix(8, 8, rng);
    e.weights = GaussianDist<>(VectorXd::Zero(8), a * a.transpose() / 8.0);
    const VectorXd x = vec({0.25});
    const auto samples = draw_function_samples(e, 20000, 5);
    double m = 0, v = 0;
    for (const auto & s : samples)
        m += s(x)(0) / 20000.0;
    for (const auto & s : samples)
        v += std::pow(s(x)(0) - m, 2) / 19999.0;
    const VectorXd phi = e.design(x).row(0);
    EXPECT_NEAR(v / phi.dot(e.weights.cov * phi), 1.0, 0.05);
}

TEST(FunctionSamples, Deterministic)
{
    const auto e = rff_expansion(K::squared_exponential(1.0, 1.0), 1, 6, 3);
    const auto a = draw_function_samples(e, 10, 77), b = draw_function_samples(e, 10, 77);
    for (std::size_t i = 0; i < 10; ++i)
        EXPECT_TRUE((a[i].theta.array() == b[i].theta.array()).all());
    auto make = [](std::size_t i) { return rff_expansion(K::squared_exponential(1.0, 1.0), 1, 6, 3, i); };
    const auto c = draw_function_samples(make, 10, 77, 1), d = draw_function_samples(make, 10, 77, 3);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_TRUE((c[i].theta.array() == d[i].theta.array()).all());
        EXPECT_EQ(c[i](vec({0.5})), d[i](vec({0.5})));
    }
}

TEST(SimulateAfs, ZeroExpansionFollowsMean)
{
    const auto e = linear_exact_expansion(K::linear(0.0), 1);
    const auto batch = simulate_with_function_samples(gain(0.95), draw_function_samples(e, 3, 1), Horizon<>(10, vec({2.0})),
                                                      MatrixXd::Zero(1, 1), 1);
    EXPECT_EQ(batch.method, MethodTag::ApproxFunctionSample);
    for (const auto & s : batch.states)
        for (Index k = 0; k <= 10; ++k)
            EXPECT_NEAR(s(0, k), 2.0 * std::pow(0.95, static_cast<double>(k)), 1e-12);
}

TEST(SimulateAfs, LinearExactIsRandomGain)
{
    const double sf = 0.05;
    const auto samples = draw_function_samples(linear_exact_expansion(K::linear(sf), 1), 20, 2);
    const auto batch = simulate_with_function_samples(gain(0.95), samples, Horizon<>(30, vec({1.0})), MatrixXd::Zero(1, 1), 2);
    for (std::size_t i = 0; i < 20; ++i) {
        const double g = 0.95 + sf * samples[i].theta(0);
        for (Index k = 0; k <= 30; ++k)
            EXPECT_NEAR(batch.states[i](0, k), std::pow(g, static_cast<double>(k)), 1e-12);
    }
}

TEST(SimulateAfs, LinearExactReproducesUncertainGainMoments)
{
    const double sf = 0.02;
    const auto samples = draw_function_samples(linear_exact_expansion(K::linear(sf), 1), 20000, 3);
    const auto batch =
        simulate_with_function_samples(gain(0.95), samples, Horizon<>(50, vec({1.0})), MatrixXd::Identity(1, 1), 3);
    ProxySpec proxy;
    proxy.variant = ProxyVariant::UncertainGain;
    proxy.sigma_f = sf;
    const auto exact = proxy_moments_closed_form(proxy);
    const auto stats = empirical_moments(batch);
    for (std::size_t k = 1; k <= 50; ++k) {
        EXPECT_LE(std::abs(stats[k].mean(0) - exact[k].mean), 3 * stats[k].mean_stderr(0)) << "step " << k;
        EXPECT_NEAR(stats[k].covariance(0, 0) / exact[k].variance, 1.0, 0.05) << "step " << k;
    }
}

TEST(SimulateAfs, RffTracksGroundTruth)
{
    const auto k = K::squared_exponential(1.0, 10.0);
    const GpModel<> model(gain(0.95), MK::scalar(k), MatrixXd::Identity(1, 1));
    const Horizon<> h(20, vec({1.0}));
    const auto gt = empirical_moments(sample_trajectories(model, h, 20000, 12));
    auto make = [&](std::size_t i) { return rff_expansion(k, 1, 10, 13, i); };
    const auto afs = empirical_moments(
        simulate_with_function_samples(gain(0.95), draw_function_samples(make, 20000, 13), h, MatrixXd::Identity(1, 1), 13));
    for (std::size_t s = 1; s <= 20; ++s)
        EXPECT_NEAR(afs[s].covariance(0, 0) / gt[s].covariance(0, 0), 1.0, 0.10) << "step " << s;
}

TEST(SimulateAfs, DirectModeAndControls)
{
    // Direct mode with exact linear features over z = [x; u]: x+ = sigma_f theta^T z.
    const auto e = linear_exact_expansion(K::linear(1.0), 2);
    auto fixed = e;
    fixed.weights = GaussianDist<>(vec({0.5, 1.0}), MatrixXd::Zero(2, 2));
    const auto samples = draw_function_samples(fixed, 2, 1);
    MatrixXd gain_u(1, 2);
    gain_u << 0.95, 1.0;
    AfsOptions opts;
    opts.mode = ExpansionMode::Direct;
    const MatrixXd u = MatrixXd::Constant(1, 5, 0.2);
    const auto batch = simulate_with_function_samples(MeanFn<>::linear_map(gain_u), samples, Horizon<>(5, vec({1.0})),
                                                      MatrixXd::Zero(1, 1), 1, opts, u);
    double x = 1.0;
    for (Index k = 0; k < 5; ++k) {
        x = 0.5 * x + 0.2;
        EXPECT_NEAR(batch.states[0](0, k + 1), x, 1e-12);
    }
    EXPECT_THROW(simulate_with_function_samples(gain(0.95), samples, Horizon<>(5, vec({1.0})), MatrixXd::Zero(1, 1), 1),
                 DimensionMismatch);
    EXPECT_THROW(simulate_with_function_samples(gain(0.95), {}, Horizon<>(5, vec({1.0})), MatrixXd::Zero(1, 1), 1), Error);
}

TEST(SimulateAfs, DivergenceIsReported)
{
    const auto samples = draw_function_samples(linear_exact_expansion(K::linear(0.0), 1), 1, 1);
    EXPECT_THROW(simulate_with_function_samples(gain(1e10), samples, Horizon<>(20, vec({1.0})), MatrixXd::Zero(1, 1), 1),
                 NonFinite);
}

TEST(Serialization, RoundTripIsExact)
{
    std::mt19937_64 rng(9);
    const MatrixXd pts = test::random_matrix(2, 6, rng);
    std::vector<BasisExpansion> cases;
    cases.push_back(rff_expansion(K::squared_exponential(1.3, 0.4), 2, 7, 5));
    cases.push_back(linear_times_base(nystrom_expansion(K::product(K::linear(0.5), K::squared_exponential(1, 1)), pts, 4), 0.9));
    cases.push_back(expansion_for(MK::distance_coupled(K::squared_exponential(1.0, 2.0), 3), 2, BasisOptions{}, 4));
    BasisOptions ny;
    ny.construction = BasisConstruction::Nystrom;
    ny.m = 5;
    ny.nystrom_points = 12;
    cases.push_back(expansion_for(MK::independent({K::squared_exponential(1, 1), K::squared_exponential(2.0, 0.5)}), 2, ny, 6));
    for (auto & e : cases) {
        e = condition_weights(e, test::random_matrix(2, 3, rng), test::random_matrix(e.out_dim(), 3, rng),
                              0.1 * MatrixXd::Identity(e.out_dim(), e.out_dim()));
        const auto samples = draw_function_samples(e, 3, 8);
        std::vector<VectorXd> thetas;
        for (const auto & s : samples)
            thetas.push_back(s.theta);
        std::stringstream buf;
        write_expansion(buf, e, thetas);
        const auto back = read_expansion(buf);
        ASSERT_EQ(back.thetas.size(), 3u);
        EXPECT_TRUE((back.expansion.weights.mean.array() == e.weights.mean.array()).all());
        EXPECT_TRUE((back.expansion.weights.cov.array() == e.weights.cov.array()).all());
        for (int t = 0; t < 5; ++t) {
            const VectorXd z = test::random_matrix(2, 1, rng);
            EXPECT_TRUE((back.expansion.design(z).array() == e.design(z).array()).all());
        }
        for (std::size_t i = 0; i < 3; ++i)
            EXPECT_TRUE((back.thetas[i].array() == thetas[i].array()).all());
    }
}

TEST(Serialization, RejectsMalformedInput)
{
    std::stringstream bad("expansion,1,0,1\nmap,fourier,1,2,1\nfreq,0.5\n");
    EXPECT_THROW(read_expansion(bad), Error);
    std::stringstream unknown("expansion,1,0,1\nmap,wavelet,1\n");
    EXPECT_THROW(read_expansion(unknown), Error);
}
