#include <random>
#include <vector>

#include <gtest/gtest.h>
#include <Eigen/Dense>

#include "gpdyn/gp_model.hpp"
#include "test_util.hpp"

using namespace gpdyn;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

using K = ScalarKernel<double>;
using MK = MatrixKernel<double>;

GpModel<> scalar_model(double ell, double q, double gain = 0.95, double sf = 1.0)
{
    return GpModel<>(MeanFn<>::linear_map(MatrixXd::Constant(1, 1, gain)), MK::scalar(K::squared_exponential(sf, ell)),
                     MatrixXd::Constant(1, 1, q));
}

GpModel<> vector_model()
{
    MatrixXd gain(2, 2);
    gain << 0.9, 0.1, -0.2, 0.8;
    MatrixXd q(2, 2);
    q << 0.1, 0.02, 0.02, 0.05;
    return GpModel<>(MeanFn<>::linear_map(gain), MK::distance_coupled(K::squared_exponential(1.0, 0.9), 2), q);
}

// Brute force: condition the joint Gaussian of (noisy training targets, query values).
GaussianDist<> brute_force_posterior(const GpModel<> & model, const MatrixXd & Xt, const MatrixXd & Yt,
                                     const MatrixXd & Xq)
{
    const Eigen::Index n = model.state_dim();
    MatrixXd all(Xt.rows(), Xt.cols() + Xq.cols());
    all << Xt, Xq;
    const MatrixXd gram = kernel_gram(model.kernel(), all);
    const VectorXd mean = mean_eval_stacked(model.mean(), all);
    const Eigen::Index p = Xt.cols() * n;
    std::vector<Index> observed(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i)
        observed[static_cast<std::size_t>(i)] = i;
    MatrixXd noise = MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < Xt.cols(); ++i)
        noise.block(i * n, i * n, n, n) = model.noise_cov();
    const VectorXd y = Eigen::Map<const VectorXd>(Yt.data(), Yt.size());
    return gaussian_condition(GaussianDist<>(mean, gram), observed, y, noise);
}

} // namespace

TEST(GpModel, EmptyDataLeavesModelUnchanged)
{
    const auto model = scalar_model(1.0, 0.1);
    const auto same = condition(model, MatrixXd(1, 0), MatrixXd(1, 0));
    EXPECT_FALSE(same.conditioned());
    const VectorXd x = VectorXd::Constant(1, 0.4);
    EXPECT_EQ(posterior_mean(same, x)(0), 0.95 * 0.4);
    EXPECT_EQ(posterior_kernel(same, x, x)(0, 0), 1.0);
}

TEST(GpModel, NoiseFreeInterpolation)
{
    const auto model = scalar_model(1.0, 0.0);
    MatrixXd X(1, 1), Y(1, 1);
    X << 0.7;
    Y << -1.3;
    const auto post = condition(model, X, Y);
    EXPECT_NEAR(posterior_mean(post, X.col(0))(0), -1.3, 1e-9);
    EXPECT_NEAR(posterior_kernel(post, X.col(0), X.col(0))(0, 0), 0.0, 1e-9);
}

TEST(GpModel, ConditioningMatchesJointGaussian)
{
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const auto model = vector_model();
        const MatrixXd Xt = test::random_matrix(2, 3, rng);
        const MatrixXd Yt = test::random_matrix(2, 3, rng);
        const MatrixXd Xq = test::random_matrix(2, 2, rng);
        const auto post = condition(model, Xt, Yt);
        const auto oracle = brute_force_posterior(model, Xt, Yt, Xq);
        EXPECT_LT((post.mean_stacked(Xq) - oracle.mean).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LT((post.gram(Xq) - oracle.cov).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LT((post.gram(Xq, Xq) - oracle.cov).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(GpModel, PriorModelReturnsMeanAndKernel)
{
    const auto model = vector_model();
    VectorXd x(2), y(2);
    x << 0.3, 1.0;
    y << -0.2, 0.1;
    EXPECT_TRUE(posterior_mean(model, x).isApprox(model.mean()(x)));
    EXPECT_TRUE(posterior_kernel(model, x, y).isApprox(model.kernel()(x, y)));
}

TEST(GpModel, PosteriorVarianceIsReduced)
{
    std::mt19937_64 rng(2);
    const auto model = vector_model();
    const auto post = condition(model, test::random_matrix(2, 4, rng), test::random_matrix(2, 4, rng));
    for (int i = 0; i < 10; ++i) {
        const VectorXd x = test::random_matrix(2, 1, rng).col(0);
        const MatrixXd reduction = posterior_kernel(model, x, x) - posterior_kernel(post, x, x);
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(reduction);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
    }
}

TEST(GpModel, TwoPointScalarHandSolve)
{
    const double sf = 1.0, ell = 1.0, q = 0.1;
    const auto model = GpModel<>(MeanFn<>::zero(1), MK::scalar(K::squared_exponential(sf, ell)), MatrixXd::Constant(1, 1, q));
    MatrixXd X(1, 2), Y(1, 2);
    X << 0.0, 1.0;
    Y << 1.0, -0.5;
    const double xq = 0.4;
    const auto kse = [&](double a, double b) { return sf * sf * std::exp(-(a - b) * (a - b) / (2 * ell * ell)); };

    // Explicit 2x2 inverse of [[a, b], [b, d]].
    const double a = kse(0, 0) + q, b = kse(0, 1), d = kse(1, 1) + q;
    const double det = a * d - b * b;
    const double inv00 = d / det, inv01 = -b / det, inv11 = a / det;
    const double k0 = kse(xq, 0), k1 = kse(xq, 1);
    const double mean = (k0 * inv00 + k1 * inv01) * 1.0 + (k0 * inv01 + k1 * inv11) * -0.5;
    const double var = kse(xq, xq) - (k0 * (inv00 * k0 + inv01 * k1) + k1 * (inv01 * k0 + inv11 * k1));

    const auto post = condition(model, X, Y);
    const VectorXd x = VectorXd::Constant(1, xq);
    EXPECT_NEAR(posterior_mean(post, x)(0), mean, 1e-12);
    EXPECT_NEAR(posterior_kernel(post, x, x)(0, 0), var, 1e-12);
}

TEST(GpModel, TraceNonIncreasingAsDataArrives)
{
    std::mt19937_64 rng(31);
    const auto model = vector_model();
    const MatrixXd Xt = test::random_matrix(2, 6, rng), Yt = test::random_matrix(2, 6, rng);
    VectorXd x(2);
    x << 0.1, -0.3;
    double previous = model.gram(x).trace();
    auto post = model;
    for (int i = 0; i < 6; ++i) {
        post = post.condition(Xt.col(i), Yt.col(i));
        const double tr = post.gram(x).trace();
        EXPECT_LE(tr, previous + 1e-12);
        previous = tr;
    }
    // Adding points one at a time equals conditioning on all of them.
    const auto batch = model.condition(Xt, Yt);
    EXPECT_NEAR(batch.gram(x).trace(), previous, 1e-10);
}

TEST(GpModel, PosteriorMeanJacobianMatchesFiniteDifferences)
{
    std::mt19937_64 rng(8);
    const auto post = vector_model().condition(test::random_matrix(2, 4, rng), test::random_matrix(2, 4, rng));
    VectorXd x(2);
    x << 0.2, 0.5;
    const MatrixXd jac = post.posterior_mean_jacobian(x);
    for (int c = 0; c < 2; ++c) {
        VectorXd up = x, down = x;
        up(c) += 1e-6;
        down(c) -= 1e-6;
        const VectorXd fd = (post.posterior_mean(up) - post.posterior_mean(down)) / 2e-6;
        EXPECT_NEAR(jac(0, c), fd(0), 1e-6);
        EXPECT_NEAR(jac(1, c), fd(1), 1e-6);
    }
}

TEST(JointStep, FirstStepMarginal)
{
    const auto model = vector_model();
    VectorXd x0(2);
    x0 << 1.0, -1.0;
    const auto d = joint_step_distribution(model, MatrixXd(x0));
    EXPECT_TRUE(d.mean.isApprox(model.mean()(x0)));
    EXPECT_TRUE(d.cov.isApprox(model.kernel()(x0, x0) + model.noise_cov()));
}

TEST(JointStep, ConstantFunctionLimit)
{
    const double q = 0.5;
    const auto model = scalar_model(1e8, q);
    MatrixXd X(1, 2);
    X << 0.3, 0.3;
    const auto d = joint_step_distribution(model, X);
    EXPECT_DOUBLE_EQ(d.cov(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(d.cov(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(d.cov(0, 0), 1.0 + q);
    EXPECT_DOUBLE_EQ(d.cov(1, 1), 1.0 + q);
}

TEST(JointStep, ThreePointsAreGramPlusNoise)
{
    std::mt19937_64 rng(12);
    const auto model = vector_model();
    const MatrixXd X = test::random_matrix(2, 3, rng);
    const auto d = joint_step_distribution(model, X);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            MatrixXd expected = model.kernel()(X.col(i), X.col(j));
            if (i == j)
                expected += model.noise_cov();
            EXPECT_LT((d.cov.block(2 * i, 2 * j, 2, 2) - expected).cwiseAbs().maxCoeff(), 1e-15);
        }
    EXPECT_NO_THROW(cholesky(d.cov));
}

TEST(JointStep, PsdForAllKernels)
{
    std::mt19937_64 rng(6);
    const auto se = K::squared_exponential(1.0, 0.5);
    const auto lin = K::linear(0.5);
    for (const auto & k : {MK::scalar(se), MK::scalar(lin), MK::scalar(K::product(lin, se))}) {
        const GpModel<> model(MeanFn<>::zero(1), k, MatrixXd::Zero(1, 1));
        const MatrixXd X = test::random_matrix(1, 15, rng);
        const auto d = joint_step_distribution(model, X);
        EXPECT_TRUE(d.cov.isApprox(d.cov.transpose()));
        EXPECT_NO_THROW(cholesky(d.cov));
    }
}

TEST(GpModel, RejectsInconsistentShapes)
{
    EXPECT_THROW(GpModel<>(MeanFn<>::zero(2), MK::scalar(K::linear(1.0)), MatrixXd::Zero(2, 2)), DimensionMismatch);
    EXPECT_THROW(GpModel<>(MeanFn<>::zero(1), MK::scalar(K::linear(1.0)), MatrixXd::Zero(2, 2)), DimensionMismatch);
    const auto model = scalar_model(1.0, 0.1);
    EXPECT_THROW(model.condition(MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 3)), DimensionMismatch);
    EXPECT_THROW(joint_step_distribution(model, MatrixXd(1, 0)), DimensionMismatch);
}
