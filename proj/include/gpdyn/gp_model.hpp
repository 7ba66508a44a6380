/**
 * @file gp_model.hpp
 * @brief GP dynamics model f ~ GP(mu, k) with process noise Q, optionally
 * conditioned on transition data.
 *
 * A conditioned model caches one factorization of k(Xt, Xt) + I (x) Q; its
 * posterior mean and kernel are then evaluated with triangular solves. The
 * engines downstream only see posterior_mean / posterior_kernel and never
 * distinguish prior from posterior.
 */

#ifndef GPDYN_GP_MODEL_HPP
#define GPDYN_GP_MODEL_HPP

#include <memory>
#include <optional>
#include <utility>

#include <Eigen/Core>

#include "gpdyn/error.hpp"
#include "gpdyn/kernel.hpp"
#include "gpdyn/linalg.hpp"
#include "gpdyn/mean.hpp"

namespace gpdyn {

/// Prediction horizon: N steps starting from x0.
template <typename Scalar = double>
struct Horizon
{
    Index steps = 1;
    Vector<Scalar> x0;

    Horizon() = default;
    Horizon(Index n_steps, Vector<Scalar> initial)
        : steps(n_steps)
        , x0(std::move(initial))
    {
        if (steps < 1)
            throw Error("horizon must have at least one step");
    }
};

template <typename Scalar = double>
class GpModel
{
public:
    struct TrainingData
    {
        Matrix<Scalar> inputs;    // d x p
        Matrix<Scalar> targets;   // n x p
        CholFactor<Scalar> factor;   // of k(Xt, Xt) + I (x) Q
        Vector<Scalar> alpha;     // (k(Xt, Xt) + I (x) Q)^{-1} (Yt - mu(Xt))
    };

    GpModel(MeanFn<Scalar> mean, MatrixKernel<Scalar> kernel, Matrix<Scalar> noise_cov,
            JitterPolicy policy = {})
        : mean_(std::move(mean))
        , kernel_(std::move(kernel))
        , noise_(std::move(noise_cov))
        , policy_(policy)
    {
        const Index n = mean_.out_dim();
        if (kernel_.out_dim() != n)
            throw DimensionMismatch("GpModel: kernel output dimension does not match mean output dimension");
        if (noise_.rows() != n || noise_.cols() != n)
            throw DimensionMismatch("GpModel: noise covariance must be n x n");
        detail::require_symmetric(noise_, "GpModel noise covariance");
        if (noise_.cwiseAbs().maxCoeff() > Scalar(0))
            (void)cholesky(noise_, policy_);   // PSD check
    }

    const MeanFn<Scalar> & mean() const { return mean_; }
    const MatrixKernel<Scalar> & kernel() const { return kernel_; }
    const Matrix<Scalar> & noise_cov() const { return noise_; }
    const JitterPolicy & jitter_policy() const { return policy_; }
    Index state_dim() const { return mean_.out_dim(); }
    Index input_dim() const { return mean_.in_dim(); }
    bool conditioned() const { return data_ != nullptr; }
    const TrainingData * training_data() const { return data_.get(); }

    /// Model conditioned on (inputs, targets); previously held data is kept.
    GpModel condition(const Matrix<Scalar> & inputs, const Matrix<Scalar> & targets) const
    {
        if (inputs.cols() != targets.cols())
            throw DimensionMismatch("condition: input and target point counts differ");
        if (inputs.cols() == 0)
            return *this;
        if (inputs.rows() != input_dim() || targets.rows() != state_dim())
            throw DimensionMismatch("condition: training data has the wrong dimensions");

        Matrix<Scalar> X = inputs, Y = targets;
        if (data_) {
            X.resize(input_dim(), data_->inputs.cols() + inputs.cols());
            X << data_->inputs, inputs;
            Y.resize(state_dim(), data_->targets.cols() + targets.cols());
            Y << data_->targets, targets;
        }

        GpModel out(*this);
        auto data = std::make_shared<TrainingData>();
        const Index n = state_dim();
        Matrix<Scalar> gram = kernel_gram(kernel_, X);
        for (Index i = 0; i < X.cols(); ++i)
            gram.block(i * n, i * n, n, n) += noise_;
        data->factor = cholesky(gram, policy_);
        const Vector<Scalar> residual = Eigen::Map<const Vector<Scalar>>(Y.data(), Y.size())
                                        - mean_eval_stacked(mean_, X);
        data->alpha = data->factor.solve(residual);
        data->inputs = std::move(X);
        data->targets = std::move(Y);
        out.data_ = std::move(data);
        return out;
    }

    /// The same mean, kernel and noise without data.
    GpModel prior() const
    {
        GpModel out(*this);
        out.data_.reset();
        return out;
    }

    template <typename A>
    Vector<Scalar> posterior_mean(const Eigen::MatrixBase<A> & x) const
    {
        Vector<Scalar> m = mean_(x);
        if (data_)
            m.noalias() += kernel_gram(kernel_, x, data_->inputs) * data_->alpha;
        return m;
    }

    /// d mu^D / dx.
    template <typename A>
    Matrix<Scalar> posterior_mean_jacobian(const Eigen::MatrixBase<A> & x) const
    {
        Matrix<Scalar> jac = mean_.jacobian(x);
        if (data_) {
            const Index n = state_dim();
            for (Index j = 0; j < data_->inputs.cols(); ++j)
                jac += kernel_.jacobian_times(x, data_->inputs.col(j), data_->alpha.segment(j * n, n));
        }
        return jac;
    }

    template <typename A, typename B>
    Matrix<Scalar> posterior_kernel(const Eigen::MatrixBase<A> & x, const Eigen::MatrixBase<B> & x2) const
    {
        return gram(x, x2);
    }

    /// L^{-1} k(Xt, X), the whitened cross-covariance to the training set.
    template <typename A>
    Matrix<Scalar> whitened_cross(const Eigen::MatrixBase<A> & X) const
    {
        if (!data_)
            return Matrix<Scalar>(0, X.cols() * state_dim());
        return data_->factor.solve_lower(kernel_gram(kernel_, data_->inputs, X));
    }

    /// Posterior gram k^D(X, X2).
    template <typename A, typename B>
    Matrix<Scalar> gram(const Eigen::MatrixBase<A> & X, const Eigen::MatrixBase<B> & X2) const
    {
        Matrix<Scalar> g = kernel_gram(kernel_, X, X2);
        if (data_)
            g.noalias() -= whitened_cross(X).transpose() * whitened_cross(X2);
        return g;
    }

    /// Posterior gram k^D(X, X), exactly symmetric.
    template <typename A>
    Matrix<Scalar> gram(const Eigen::MatrixBase<A> & X) const
    {
        Matrix<Scalar> g = kernel_gram(kernel_, X);
        if (data_) {
            const Matrix<Scalar> v = whitened_cross(X);
            g.noalias() -= v.transpose() * v;
            g = Scalar(0.5) * (g + g.transpose()).eval();
        }
        return g;
    }

    template <typename A>
    Vector<Scalar> mean_stacked(const Eigen::MatrixBase<A> & X) const
    {
        const Index n = state_dim();
        Vector<Scalar> out(X.cols() * n);
        for (Index i = 0; i < X.cols(); ++i)
            out.segment(i * n, n) = posterior_mean(X.col(i));
        return out;
    }

    /// Adds I (x) Q to the diagonal blocks of a stacked covariance.
    void add_noise_blocks(Matrix<Scalar> & cov) const
    {
        const Index n = state_dim();
        for (Index i = 0; i < cov.rows() / n; ++i)
            cov.block(i * n, i * n, n, n) += noise_;
    }

private:
    MeanFn<Scalar> mean_;
    MatrixKernel<Scalar> kernel_;
    Matrix<Scalar> noise_;
    JitterPolicy policy_;
    std::shared_ptr<const TrainingData> data_;
};

template <typename Scalar>
GpModel<Scalar> condition(const GpModel<Scalar> & model, const Matrix<Scalar> & inputs, const Matrix<Scalar> & targets)
{
    return model.condition(inputs, targets);
}

template <typename Scalar, typename A>
Vector<Scalar> posterior_mean(const GpModel<Scalar> & model, const Eigen::MatrixBase<A> & x)
{
    return model.posterior_mean(x);
}

template <typename Scalar, typename A, typename B>
Matrix<Scalar> posterior_kernel(const GpModel<Scalar> & model, const Eigen::MatrixBase<A> & x,
                                const Eigen::MatrixBase<B> & x2)
{
    return model.posterior_kernel(x, x2);
}

/**
 * @brief Joint law of the successors X_{1:k+1} given visited points X_{0:k}:
 * N(mu(X_{0:k}), k(X_{0:k}, X_{0:k}) + I (x) Q).
 */
template <typename Scalar, typename A>
GaussianDist<Scalar> joint_step_distribution(const GpModel<Scalar> & model, const Eigen::MatrixBase<A> & visited)
{
    if (visited.cols() == 0)
        throw DimensionMismatch("joint_step_distribution: no visited points");
    Matrix<Scalar> cov = model.gram(visited);
    model.add_noise_blocks(cov);
    return GaussianDist<Scalar>(model.mean_stacked(visited), std::move(cov));
}

} // namespace gpdyn

#endif
