/**
 * @file moments.hpp
 * @brief Gaussian approximations of the trajectory law without sampling.
 *
 * propagate_linearized linearizes the mean function around the mean chain and
 * keeps the kernel at zero order, which yields the joint covariance
 * A (k(M, M) + I (x) Q) A^T of the whole trajectory. propagate_independent is
 * the usual baseline that treats successive function values as uncorrelated.
 */

#ifndef GPDYN_MOMENTS_HPP
#define GPDYN_MOMENTS_HPP

#include <cmath>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "gpdyn/error.hpp"
#include "gpdyn/gp_model.hpp"
#include "gpdyn/linalg.hpp"

namespace gpdyn {

enum class MomentMethod
{
    LinearizedJoint,
    IndependenceBaseline,
};

inline std::string to_string(MomentMethod m)
{
    return m == MomentMethod::LinearizedJoint ? "linearized" : "independent";
}

template <typename Scalar = double>
struct MomentSequence
{
    Index state_dim = 0;
    Index horizon = 0;
    /// state_dim x (horizon + 1); column 0 is x0.
    Matrix<Scalar> means;
    /// Joint covariance of X_{1:N}; LinearizedJoint only.
    Matrix<Scalar> cov;
    /// Per-step covariances of x_1..x_N; IndependenceBaseline only.
    std::vector<Matrix<Scalar>> blocks;
    MomentMethod method = MomentMethod::LinearizedJoint;
    /// Set when round-off made cov indefinite and eigenvalues were floored.
    bool repaired = false;
};

template <typename Scalar = double>
struct Marginal
{
    Vector<Scalar> mean;
    Matrix<Scalar> cov;
};

struct MomentOptions
{
    /// Verify the joint covariance with a jittered Cholesky and repair it if
    /// that fails. Costs one factorization of the (N n)^2 matrix.
    bool psd_check = true;
};

/**
 * @brief Lower block-triangular chain A with A_ii = I and
 * A_ij = J_{i-1} ... J_j for i > j.
 *
 * jacobians[l - 1] is the state Jacobian of the mean at step l, l = 1..N-1,
 * so N = jacobians.size() + 1.
 */
template <typename Scalar>
Matrix<Scalar> gradient_chain(Index state_dim, const std::vector<Matrix<Scalar>> & jacobians)
{
    const Index n = state_dim;
    const Index N = static_cast<Index>(jacobians.size()) + 1;
    for (const auto & j : jacobians)
        if (j.rows() != n || j.cols() != n)
            throw DimensionMismatch("gradient_chain: Jacobians must be state_dim x state_dim");
    Matrix<Scalar> A = Matrix<Scalar>::Zero(N * n, N * n);
    for (Index i = 0; i < N; ++i) {
        A.block(i * n, i * n, n, n).setIdentity();
        for (Index j = 0; j < i; ++j)
            A.block(i * n, j * n, n, n) = jacobians[static_cast<std::size_t>(i - 1)] * A.block((i - 1) * n, j * n, n, n);
    }
    return A;
}

namespace detail {

/// Mean chain and linearization points of a (possibly controlled) model.
template <typename Scalar>
struct MeanChain
{
    Matrix<Scalar> means;            // n x (N+1)
    Matrix<Scalar> points;           // input_dim x N, points[k] = [mu_k; u_k]
    std::vector<Matrix<Scalar>> jac; // state Jacobians at steps 1..N-1
};

template <typename Scalar>
MeanChain<Scalar> mean_chain(const GpModel<Scalar> & model, const Horizon<Scalar> & h, const Matrix<Scalar> & inputs)
{
    const Index n = model.state_dim();
    const Index m = inputs.rows();
    if (h.x0.size() != n)
        throw DimensionMismatch("initial state length does not match the model state dimension");
    if (model.input_dim() != n + m)
        throw DimensionMismatch("model input dimension must equal state_dim + control inputs");
    if (m > 0 && inputs.cols() < h.steps)
        throw DimensionMismatch("control input sequence is shorter than the horizon");

    MeanChain<Scalar> c;
    c.means.resize(n, h.steps + 1);
    c.points.resize(n + m, h.steps);
    c.means.col(0) = h.x0;
    for (Index k = 0; k < h.steps; ++k) {
        c.points.col(k).head(n) = c.means.col(k);
        if (m > 0)
            c.points.col(k).tail(m) = inputs.col(k);
        c.means.col(k + 1) = model.posterior_mean(c.points.col(k));
        for (Index i = 0; i < n; ++i) {
            const Scalar v = c.means(i, k + 1);
            if (!std::isfinite(static_cast<double>(v)) || std::abs(static_cast<double>(v)) > 1e100)
                throw NonFinite("mean chain diverged", static_cast<std::size_t>(k + 1));
        }
        if (k > 0)
            c.jac.push_back(model.posterior_mean_jacobian(c.points.col(k)).leftCols(n));
    }
    return c;
}

/// Symmetrize, and floor negative eigenvalues at zero if the jittered
/// Cholesky cannot factor the matrix. Returns true when repaired.
template <typename Scalar>
bool repair_psd(Matrix<Scalar> & cov, const JitterPolicy & policy)
{
    cov = Scalar(0.5) * (cov + cov.transpose()).eval();
    try {
        (void)cholesky(cov, policy);
        return false;
    } catch (const NotPositiveDefinite &) {
    }
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(cov);
    const Vector<Scalar> vals = eig.eigenvalues().cwiseMax(Scalar(0));
    cov = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
    cov = Scalar(0.5) * (cov + cov.transpose()).eval();
    spdlog::warn("linearized covariance failed the PSD check; floored {} negative eigenvalue(s), min was {}",
                 (eig.eigenvalues().array() < Scalar(0)).count(), static_cast<double>(eig.eigenvalues().minCoeff()));
    return true;
}

template <typename Scalar>
MomentSequence<Scalar> linearized(const GpModel<Scalar> & model, const Horizon<Scalar> & h,
                                  const Matrix<Scalar> & inputs, const MomentOptions & opts)
{
    const Index n = model.state_dim();
    const Index N = h.steps;
    auto chain = mean_chain(model, h, inputs);

    Matrix<Scalar> G = model.gram(chain.points);
    model.add_noise_blocks(G);

    // Blockwise recursion for A G A^T in O(N^2) block products:
    //   E(r, s) = Cov(eps_r, D_s) = E(r, s-1) J_{s-1}^T + G(r, s)
    //   C(r, s) = J_{r-1} C(r-1, s) + E(r, s),  s <= r
    // with D_r = x_r - mu_r and eps_r the function-plus-noise term of step r.
    Matrix<Scalar> C(N * n, N * n);
    Matrix<Scalar> E(n, n);
    for (Index r = 0; r < N; ++r) {
        for (Index s = 0; s <= r; ++s) {
            if (s == 0)
                E = G.block(r * n, 0, n, n);
            else
                E = E * chain.jac[static_cast<std::size_t>(s - 1)].transpose() + G.block(r * n, s * n, n, n);
            if (r == 0) {
                C.block(0, 0, n, n) = E;
                continue;
            }
            const auto & J = chain.jac[static_cast<std::size_t>(r - 1)];
            // C(r-1, r) was mirrored in when s == r-1.
            C.block(r * n, s * n, n, n) = J * C.block((r - 1) * n, s * n, n, n) + E;
            if (s < r)
                C.block(s * n, r * n, n, n) = C.block(r * n, s * n, n, n).transpose();
        }
    }

    MomentSequence<Scalar> out;
    out.state_dim = n;
    out.horizon = N;
    out.means = std::move(chain.means);
    out.cov = std::move(C);
    out.method = MomentMethod::LinearizedJoint;
    if (opts.psd_check)
        out.repaired = repair_psd(out.cov, model.jitter_policy());
    return out;
}

template <typename Scalar>
MomentSequence<Scalar> independent(const GpModel<Scalar> & model, const Horizon<Scalar> & h,
                                   const Matrix<Scalar> & inputs)
{
    const Index n = model.state_dim();
    auto chain = mean_chain(model, h, inputs);
    MomentSequence<Scalar> out;
    out.state_dim = n;
    out.horizon = h.steps;
    out.method = MomentMethod::IndependenceBaseline;
    out.blocks.reserve(static_cast<std::size_t>(h.steps));
    Matrix<Scalar> sigma;
    for (Index k = 0; k < h.steps; ++k) {
        Matrix<Scalar> next = model.gram(chain.points.col(k)) + model.noise_cov();
        if (k > 0) {
            const auto & J = chain.jac[static_cast<std::size_t>(k - 1)];
            next.noalias() += J * sigma * J.transpose();
        }
        sigma = Scalar(0.5) * (next + next.transpose());
        out.blocks.push_back(sigma);
    }
    out.means = std::move(chain.means);
    return out;
}

} // namespace detail

template <typename Scalar>
MomentSequence<Scalar> propagate_linearized(const GpModel<Scalar> & model, const Horizon<Scalar> & h,
                                            const MomentOptions & opts = {})
{
    return detail::linearized(model, h, Matrix<Scalar>(0, h.steps), opts);
}

/// Controlled variant: the chain is driven by inputs (m x N) and A uses the
/// partial Jacobian with respect to the state only.
template <typename Scalar>
MomentSequence<Scalar> propagate_linearized_controlled(const GpModel<Scalar> & model, const Horizon<Scalar> & h,
                                                       const std::type_identity_t<Matrix<Scalar>> & inputs,
                                                       const MomentOptions & opts = {})
{
    return detail::linearized(model, h, inputs, opts);
}

template <typename Scalar>
MomentSequence<Scalar> propagate_independent(const GpModel<Scalar> & model, const Horizon<Scalar> & h)
{
    return detail::independent(model, h, Matrix<Scalar>(0, h.steps));
}

template <typename Scalar>
MomentSequence<Scalar> propagate_independent_controlled(const GpModel<Scalar> & model, const Horizon<Scalar> & h,
                                                        const std::type_identity_t<Matrix<Scalar>> & inputs)
{
    return detail::independent(model, h, inputs);
}

/// Per-step (mean, covariance) of x_1..x_N.
template <typename Scalar>
std::vector<Marginal<Scalar>> marginals(const MomentSequence<Scalar> & ms)
{
    const Index n = ms.state_dim;
    std::vector<Marginal<Scalar>> out;
    out.reserve(static_cast<std::size_t>(ms.horizon));
    for (Index k = 0; k < ms.horizon; ++k) {
        Marginal<Scalar> m;
        m.mean = ms.means.col(k + 1);
        if (ms.method == MomentMethod::LinearizedJoint)
            m.cov = ms.cov.block(k * n, k * n, n, n);
        else
            m.cov = ms.blocks[static_cast<std::size_t>(k)];
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace gpdyn

#endif
