/**
 * @file linalg.hpp
 * @brief Dense Gaussian linear algebra: jittered Cholesky factorization with
 * incremental block extension, multivariate-normal sampling and Gaussian
 * conditioning.
 *
 * All routines are templated on the scalar type. Factors are lower
 * triangular, L * L^T = M.
 */

#ifndef GPDYN_LINALG_HPP
#define GPDYN_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include "gpdyn/error.hpp"

namespace gpdyn {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/**
 * @brief Diagonal jitter ladder used when a covariance is only positive
 * semidefinite.
 *
 * Jitter values are relative to trace/dim of the matrix being factorized.
 * The ladder starts at @c min_relative and is multiplied by @c growth until
 * it exceeds @c max_relative. A matrix with zero trace has no natural scale;
 * @c zero_scale_floor is used as the scale in that case (0 disables it, so
 * the zero matrix is rejected).

 */
struct JitterPolicy
{
    double min_relative = 1e-12;
    double max_relative = 1e-6;
    double growth = 10.0;
    double zero_scale_floor = 1e-20;

    static JitterPolicy none() { return {0.0, 0.0, 10.0, 0.0}; }
};

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived> & m, const char * what)
{
    if (m.rows() != m.cols())
        throw DimensionMismatch(std::string(what) + ": matrix is " + std::to_string(m.rows()) + "x"
                                + std::to_string(m.cols()) + ", expected square");
}

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived> & m, const char * what)
{
    using Scalar = typename Derived::Scalar;
    const Scalar scale = m.cwiseAbs().maxCoeff();
    if (scale == Scalar(0))
        return;
    const Scalar asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= Scalar(1e-12) * scale))
        throw NotSymmetric(std::string(what) + ": matrix is not symmetric");
}

// Factorizes m, escalating diagonal jitter through the policy ladder. The
// jitter scale is trace(scale_source)/dim. Returns the jitter that was added.
template <typename Scalar>
Scalar factor_with_ladder(const Matrix<Scalar> & m, Scalar scale, const JitterPolicy & policy,
                          Matrix<Scalar> & lower)
{
    const Index n = m.rows();
    Eigen::LLT<Matrix<Scalar>> llt(m);
    if (llt.info() == Eigen::Success) {
        lower = llt.matrixL();
        return Scalar(0);
    }
    if (scale == Scalar(0))
        scale = Scalar(policy.zero_scale_floor);
    if (!(scale > Scalar(0)) || policy.max_relative <= 0.0 || policy.min_relative <= 0.0)
        throw NotPositiveDefinite("Cholesky factorization failed and no jitter is available");

    Matrix<Scalar> shifted = m;
    for (double rel = policy.min_relative; rel <= policy.max_relative * (1.0 + 1e-9); rel *= policy.growth) {
        const Scalar jitter = Scalar(rel) * scale;
        shifted.diagonal() = m.diagonal().array() + jitter;
        llt.compute(shifted);
        if (llt.info() == Eigen::Success) {
            lower = llt.matrixL();
            return jitter;
        }
        if (policy.growth <= 1.0)
            break;
    }
    throw NotPositiveDefinite("Cholesky factorization failed after exhausting the jitter ladder (dim "
                              + std::to_string(n) + ")");
}

} // namespace detail

/**
 * @brief Lower-triangular Cholesky factor with the jitter that was needed to
 * obtain it.
 *
 * The factor can be grown by whole block rows with extend(); existing rows are
 * copied unchanged, so a factor grown step by step agrees bit for bit with its
 * earlier prefix.
 */
template <typename Scalar = double>
class CholFactor
{
public:
    CholFactor() = default;

    CholFactor(Matrix<Scalar> lower, Scalar jitter_used)
        : lower_(std::move(lower))
        , jitter_used_(jitter_used)
    {}

    Index dim() const { return lower_.rows(); }
    const Matrix<Scalar> & lower() const { return lower_; }
    Scalar jitter_used() const { return jitter_used_; }

    Matrix<Scalar> reconstruct() const { return lower_ * lower_.transpose(); }

    /// Appends the block row for [[old, cross], [cross^T, corner]].
    void extend(const Matrix<Scalar> & cross, const Matrix<Scalar> & corner,
                const JitterPolicy & policy = {})
    {
        detail::require_square(corner, "cholesky_extend");
        const Index old_dim = dim();
        const Index block = corner.rows();
        if (cross.rows() != old_dim || cross.cols() != block)
            throw DimensionMismatch("cholesky_extend: cross block is " + std::to_string(cross.rows()) + "x"
                                    + std::to_string(cross.cols()) + ", expected "
                                    + std::to_string(old_dim) + "x" + std::to_string(block));

        // L11 * B = cross, new block row is [B^T, chol(corner - B^T B)]
        Matrix<Scalar> solved;
        if (old_dim > 0)
            solved = lower_.template triangularView<Eigen::Lower>().solve(cross);
        else
            solved.resize(0, block);

        Matrix<Scalar> schur = corner;
        if (old_dim > 0)
            schur.noalias() -= solved.transpose() * solved;
        schur = Scalar(0.5) * (schur + schur.transpose()).eval();

        Matrix<Scalar> corner_lower;
        const Scalar scale = corner.trace() / Scalar(block);
        const Scalar jitter = detail::factor_with_ladder<Scalar>(schur, scale, policy, corner_lower);

        lower_.conservativeResize(old_dim + block, old_dim + block);
        lower_.topRightCorner(old_dim, block).setZero();
        lower_.bottomLeftCorner(block, old_dim) = solved.transpose();
        lower_.bottomRightCorner(block, block) = corner_lower;
        jitter_used_ = std::max(jitter_used_, jitter);
    }

    /// Returns lower * z.
    Vector<Scalar> apply(const Vector<Scalar> & z) const
    {
        if (z.size() != dim())
            throw DimensionMismatch("CholFactor::apply: vector length does not match factor");
        return lower_.template triangularView<Eigen::Lower>() * z;
    }

    /// Solves (L L^T) X = B.
    template <typename Derived>
    Matrix<Scalar> solve(const Eigen::MatrixBase<Derived> & rhs) const
    {
        if (rhs.rows() != dim())
            throw DimensionMismatch("CholFactor::solve: right-hand side rows do not match factor");
        Matrix<Scalar> x = lower_.template triangularView<Eigen::Lower>().solve(rhs);
        lower_.transpose().template triangularView<Eigen::Upper>().solveInPlace(x);
        return x;
    }

    /// Solves L X = B.
    template <typename Derived>
    Matrix<Scalar> solve_lower(const Eigen::MatrixBase<Derived> & rhs) const
    {
        if (rhs.rows() != dim())
            throw DimensionMismatch("CholFactor::solve_lower: right-hand side rows do not match factor");
        return lower_.template triangularView<Eigen::Lower>().solve(rhs);
    }

private:
    Matrix<Scalar> lower_;
    Scalar jitter_used_ = Scalar(0);
};

/// Factorizes a symmetric matrix, escalating diagonal jitter if necessary.
template <typename Derived>
CholFactor<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived> & m,
                                              const JitterPolicy & policy = {})
{
    using Scalar = typename Derived::Scalar;
    detail::require_square(m, "cholesky");
    if (m.rows() == 0)
        throw DimensionMismatch("cholesky: empty matrix");
    detail::require_symmetric(m, "cholesky");
    Matrix<Scalar> sym = Scalar(0.5) * (m + m.transpose());
    Matrix<Scalar> lower;
    const Scalar jitter = detail::factor_with_ladder<Scalar>(sym, sym.trace() / Scalar(sym.rows()), policy, lower);
    return CholFactor<Scalar>(std::move(lower), jitter);
}

/// Factor of [[old, cross], [cross^T, corner]] reusing the rows of @p f.
template <typename Scalar>
CholFactor<Scalar> cholesky_extend(const CholFactor<Scalar> & f, const std::type_identity_t<Matrix<Scalar>> & cross,
                                   const std::type_identity_t<Matrix<Scalar>> & corner, const JitterPolicy & policy = {})
{
    detail::require_square(corner, "cholesky_extend");
    detail::require_symmetric(corner, "cholesky_extend");
    CholFactor<Scalar> out = f;
    out.extend(cross, corner, policy);
    return out;
}

/// Multivariate normal N(mean, cov).
template <typename Scalar = double>
struct GaussianDist
{
    Vector<Scalar> mean;
    Matrix<Scalar> cov;

    GaussianDist() = default;
    GaussianDist(Vector<Scalar> m, Matrix<Scalar> c)
        : mean(std::move(m))
        , cov(std::move(c))
    {
        detail::require_square(cov, "GaussianDist");
        if (cov.rows() != mean.size())
            throw DimensionMismatch("GaussianDist: mean length does not match covariance dimension");
    }

    Index dim() const { return mean.size(); }

    static GaussianDist standard(Index n)
    {
        return GaussianDist(Vector<Scalar>::Zero(n), Matrix<Scalar>::Identity(n, n));
    }
};

/// mean + chol(cov) * std_normals, with a precomputed factor.
template <typename Scalar>
Vector<Scalar> mvn_sample(const GaussianDist<Scalar> & d, const CholFactor<Scalar> & factor,
                          const std::type_identity_t<Vector<Scalar>> & std_normals)
{
    if (std_normals.size() != d.dim() || factor.dim() != d.dim())
        throw DimensionMismatch("mvn_sample: standard normal vector length does not match distribution");
    return d.mean + factor.apply(std_normals);
}

/// mean + chol(cov) * std_normals.
template <typename Scalar>
Vector<Scalar> mvn_sample(const GaussianDist<Scalar> & d, const std::type_identity_t<Vector<Scalar>> & std_normals,
                          const JitterPolicy & policy = {})
{
    if (std_normals.size() != d.dim())
        throw DimensionMismatch("mvn_sample: standard normal vector length does not match distribution");
    return mvn_sample(d, cholesky(d.cov, policy), std_normals);
}

/**
 * @brief Posterior of the unobserved coordinates of @p joint after observing
 * @p observed_val = x[observed_idx] + v, v ~ N(0, obs_noise).
 *
 * The result is ordered by ascending unobserved index.
 */
template <typename Scalar>
GaussianDist<Scalar> gaussian_condition(const GaussianDist<Scalar> & joint, std::span<const Index> observed_idx,
                                        const std::type_identity_t<Vector<Scalar>> & observed_val,
                                        const std::type_identity_t<Matrix<Scalar>> & obs_noise,
                                        const JitterPolicy & policy = {})
{
    const Index n = joint.dim();
    const Index p = static_cast<Index>(observed_idx.size());
    if (observed_val.size() != p || obs_noise.rows() != p || obs_noise.cols() != p)
        throw DimensionMismatch("gaussian_condition: observation sizes do not match index set");
    if (p == 0)
        return joint;

    std::vector<char> is_observed(static_cast<std::size_t>(n), 0);
    for (Index i : observed_idx) {
        if (i < 0 || i >= n)
            throw DimensionMismatch("gaussian_condition: observed index out of range");
        if (is_observed[static_cast<std::size_t>(i)])
            throw DimensionMismatch("gaussian_condition: duplicate observed index");
        is_observed[static_cast<std::size_t>(i)] = 1;
    }
    std::vector<Index> free_idx;
    for (Index i = 0; i < n; ++i)
        if (!is_observed[static_cast<std::size_t>(i)])
            free_idx.push_back(i);
    const Index q = static_cast<Index>(free_idx.size());

    Matrix<Scalar> s_oo(p, p), s_uo(q, p), s_uu(q, q);
    Vector<Scalar> m_o(p), m_u(q);
    for (Index a = 0; a < p; ++a) {
        m_o(a) = joint.mean(observed_idx[a]);
        for (Index b = 0; b < p; ++b)
            s_oo(a, b) = joint.cov(observed_idx[a], observed_idx[b]);
    }
    for (Index a = 0; a < q; ++a) {
        m_u(a) = joint.mean(free_idx[a]);
        for (Index b = 0; b < p; ++b)
            s_uo(a, b) = joint.cov(free_idx[a], observed_idx[b]);
        for (Index b = 0; b < q; ++b)
            s_uu(a, b) = joint.cov(free_idx[a], free_idx[b]);
    }

    const CholFactor<Scalar> factor = cholesky(Matrix<Scalar>(s_oo + obs_noise), policy);
    const Matrix<Scalar> gain_t = factor.solve(s_uo.transpose());   // S_oo^{-1} S_ou
    Vector<Scalar> mean = m_u + gain_t.transpose() * (observed_val - m_o);
    Matrix<Scalar> cov = s_uu - s_uo * gain_t;
    cov = Scalar(0.5) * (cov + cov.transpose()).eval();
    return GaussianDist<Scalar>(std::move(mean), std::move(cov));
}

template <typename Scalar>
GaussianDist<Scalar> gaussian_condition(const GaussianDist<Scalar> & joint, const std::vector<Index> & observed_idx,
                                        const std::type_identity_t<Vector<Scalar>> & observed_val,
                                        const std::type_identity_t<Matrix<Scalar>> & obs_noise,
                                        const JitterPolicy & policy = {})
{
    return gaussian_condition(joint, std::span<const Index>(observed_idx), observed_val, obs_noise, policy);
}

} // namespace gpdyn

#endif
