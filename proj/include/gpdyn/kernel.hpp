/**
 * @file kernel.hpp
 * @brief Scalar kernels (squared exponential, linear, products) and the
 * matrix-valued kernels built from them.
 *
 * Stacked states are stored as the columns of a matrix: a set of p points in
 * R^d is a d x p matrix. A matrix-valued kernel with n outputs evaluated on p
 * and q points gives a (p*n) x (q*n) gram whose (i, j) block is k(x_i, x'_j).
 */

#ifndef GPDYN_KERNEL_HPP
#define GPDYN_KERNEL_HPP

#include <cmath>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "gpdyn/error.hpp"
#include "gpdyn/linalg.hpp"

namespace gpdyn {

template <typename Scalar = double>
class ScalarKernel
{
public:
    /// sigma_f^2 exp(-|x - x'|^2 / (2 l^2))
    struct SquaredExponential
    {
        Scalar sigma_f;
        Scalar lengthscale;
    };

    /// sigma_f^2 x^T x'
    struct Linear
    {
        Scalar sigma_f;
    };

    struct Product
    {
        std::shared_ptr<const ScalarKernel> left;
        std::shared_ptr<const ScalarKernel> right;
    };

    using Variant = std::variant<SquaredExponential, Linear, Product>;

    static ScalarKernel squared_exponential(Scalar sigma_f, Scalar lengthscale)
    {
        if (!(lengthscale > Scalar(0)))
            throw Error("squared exponential kernel: lengthscale must be positive");
        if (!(sigma_f >= Scalar(0)))
            throw Error("squared exponential kernel: sigma_f must be nonnegative");
        return ScalarKernel(SquaredExponential{sigma_f, lengthscale});
    }

    static ScalarKernel linear(Scalar sigma_f)
    {
        if (!(sigma_f >= Scalar(0)))
            throw Error("linear kernel: sigma_f must be nonnegative");
        return ScalarKernel(Linear{sigma_f});
    }

    static ScalarKernel product(ScalarKernel left, ScalarKernel right)
    {
        return ScalarKernel(Product{std::make_shared<const ScalarKernel>(std::move(left)),
                                    std::make_shared<const ScalarKernel>(std::move(right))});
    }

    const Variant & variant() const { return variant_; }

    template <typename A, typename B>
    Scalar operator()(const Eigen::MatrixBase<A> & x, const Eigen::MatrixBase<B> & x2) const
    {
        if (x.size() != x2.size())
            throw DimensionMismatch("kernel evaluation: input lengths differ");
        return std::visit([&](const auto & k) { return eval(k, x, x2); }, variant_);
    }

    /// Gradient of k(x, x2) with respect to its first argument.
    template <typename A, typename B>
    Vector<Scalar> gradient(const Eigen::MatrixBase<A> & x, const Eigen::MatrixBase<B> & x2) const
    {
        if (x.size() != x2.size())
            throw DimensionMismatch("kernel gradient: input lengths differ");
        return std::visit([&](const auto & k) { return grad(k, x, x2); }, variant_);
    }

private:
    explicit ScalarKernel(Variant v)
        : variant_(std::move(v))
    {}

    template <typename A, typename B>
    static Scalar eval(const SquaredExponential & k, const Eigen::MatrixBase<A> & x, const Eigen::MatrixBase<B> & x2)
    {
        const Scalar r2 = (x - x2).squaredNorm();
        return k.sigma_f * k.sigma_f * std::exp(-r2 / (Scalar(2) * k.lengthscale * k.lengthscale));
    }

    template <typename A, typename B>
    static Scalar eval(const Linear & k, const Eigen::MatrixBase<A> & x, const Eigen::MatrixBase<B> & x2)
    {
        return k.sigma_f * k.sigma_f * x.dot(x2);
    }

    template <typename A, typename B>
    static Scalar eval(const Product & k, const Eigen::MatrixBase<A> & x, const Eigen::MatrixBase<B> & x2)
    {
        return (*k.left)(x, x2) * (*k.right)(x, x2);
    }

    template <typename A, typename B>
    static Vector<Scalar> grad(const SquaredExponential & k, const Eigen::MatrixBase<A> & x,
                               const Eigen::MatrixBase<B> & x2)
    {
        const Scalar l2 = k.lengthscale * k.lengthscale;
        return -eval(k, x, x2) / l2 * (x - x2);
    }

    template <typename A, typename B>
    static Vector<Scalar> grad(const Linear & k, const Eigen::MatrixBase<A> &, const Eigen::MatrixBase<B> & x2)
    {
        return k.sigma_f * k.sigma_f * x2;
    }

    template <typename A, typename B>
    static Vector<Scalar> grad(const Product & k, const Eigen::MatrixBase<A> & x, const Eigen::MatrixBase<B> & x2)
    {
        return k.left->gradient(x, x2) * (*k.right)(x, x2) + (*k.left)(x, x2) * k.right->gradient(x, x2);
    }

    Variant variant_;
};

/**
 * @brief Matrix-valued kernel k: R^d x R^d -> R^{n x n}.
 *
 * Two constructions are provided: independent outputs, where [k]_{ii} is a
 * per-output scalar kernel and off-diagonal entries vanish, and distance
 * coupling, where [k(x, x')]_{ij} = k_s([x; d(i)], [x'; d(j)]) for a metric
 * value d(i) attached to each output.
 */
template <typename Scalar = double>
class MatrixKernel
{
public:
    struct IndependentOutputs
    {
        std::vector<ScalarKernel<Scalar>> per_dim;
    };

    struct DistanceCoupled
    {
        ScalarKernel<Scalar> base;
        Vector<Scalar> metric;
    };

    using Construction = std::variant<IndependentOutputs, DistanceCoupled>;

    static MatrixKernel independent(std::vector<ScalarKernel<Scalar>> per_dim)
    {
        if (per_dim.empty())
            throw DimensionMismatch("independent-output kernel needs at least one output");
        return MatrixKernel(IndependentOutputs{std::move(per_dim)});
    }

    static MatrixKernel independent(const ScalarKernel<Scalar> & k, Index out_dim)
    {
        return independent(std::vector<ScalarKernel<Scalar>>(static_cast<std::size_t>(out_dim), k));
    }

    /// Output coupling with d(i) = i.
    static MatrixKernel distance_coupled(ScalarKernel<Scalar> base, Index out_dim)
    {
        return distance_coupled(std::move(base), Vector<Scalar>::LinSpaced(out_dim, Scalar(0), Scalar(out_dim - 1)));
    }

    static MatrixKernel distance_coupled(ScalarKernel<Scalar> base, Vector<Scalar> metric)
    {
        if (metric.size() == 0)
            throw DimensionMismatch("distance-coupled kernel needs at least one output");
        return MatrixKernel(DistanceCoupled{std::move(base), std::move(metric)});
    }

    /// Scalar kernel on a single output.
    static MatrixKernel scalar(const ScalarKernel<Scalar> & k) { return independent(k, 1); }

    Index out_dim() const
    {
        if (const auto * ind = std::get_if<IndependentOutputs>(&construction_))
            return static_cast<Index>(ind->per_dim.size());
        return std::get<DistanceCoupled>(construction_).metric.size();
    }

    const Construction & construction() const { return construction_; }

    template <typename A, typename B>
    Matrix<Scalar> operator()(const Eigen::MatrixBase<A> & x, const Eigen::MatrixBase<B> & x2) const
    {
        Matrix<Scalar> out(out_dim(), out_dim());
        write_block(x, x2, out);
        return out;
    }

    /// Writes k(x, x2) into an n x n block.
    template <typename A, typename B, typename Out>
    void write_block(const Eigen::MatrixBase<A> & x, const Eigen::MatrixBase<B> & x2, Out && out) const
    {
        if (x.size() != x2.size())
            throw DimensionMismatch("kernel evaluation: input lengths differ");
        const Index n = out_dim();
        if (const auto * ind = std::get_if<IndependentOutputs>(&construction_)) {
            out.setZero();
            for (Index i = 0; i < n; ++i)
                out(i, i) = ind->per_dim[static_cast<std::size_t>(i)](x, x2);
            return;
        }
        const auto & dc = std::get<DistanceCoupled>(construction_);
        Vector<Scalar> za(x.size() + 1), zb(x.size() + 1);
        za.head(x.size()) = x;
        zb.head(x.size()) = x2;
        for (Index i = 0; i < n; ++i) {
            za(x.size()) = dc.metric(i);
            for (Index j = 0; j < n; ++j) {
                zb(x.size()) = dc.metric(j);
                out(i, j) = dc.base(za, zb);
            }
        }
    }

    /**
     * @brief Derivative of k(x, x2) * v with respect to x.
     *
     * Row a of the result is sum_b v_b d k_ab(x, x2) / dx.
     */
    template <typename A, typename B>
    Matrix<Scalar> jacobian_times(const Eigen::MatrixBase<A> & x, const Eigen::MatrixBase<B> & x2,
                                  const Vector<Scalar> & v) const
    {
        const Index n = out_dim();
        const Index d = x.size();
        Matrix<Scalar> out = Matrix<Scalar>::Zero(n, d);
        if (const auto * ind = std::get_if<IndependentOutputs>(&construction_)) {
            for (Index a = 0; a < n; ++a)
                out.row(a) = v(a) * ind->per_dim[static_cast<std::size_t>(a)].gradient(x, x2).transpose();
            return out;
        }
        const auto & dc = std::get<DistanceCoupled>(construction_);
        Vector<Scalar> za(d + 1), zb(d + 1);
        za.head(d) = x;
        zb.head(d) = x2;
        for (Index a = 0; a < n; ++a) {
            za(d) = dc.metric(a);
            for (Index b = 0; b < n; ++b) {
                zb(d) = dc.metric(b);
                out.row(a) += v(b) * dc.base.gradient(za, zb).head(d).transpose();
            }
        }
        return out;
    }

private:
    explicit MatrixKernel(Construction c)
        : construction_(std::move(c))
    {}

    Construction construction_;
};

/// k(x, x2) as an n x n block.
template <typename Scalar, typename A, typename B>
Matrix<Scalar> kernel_eval(const MatrixKernel<Scalar> & k, const Eigen::MatrixBase<A> & x,
                           const Eigen::MatrixBase<B> & x2)
{
    return k(x, x2);
}

/// Stacked gram k(X, X2); points are the columns of X and X2.
template <typename Scalar, typename A, typename B>
Matrix<Scalar> kernel_gram(const MatrixKernel<Scalar> & k, const Eigen::MatrixBase<A> & X,
                           const Eigen::MatrixBase<B> & X2)
{
    if (X.rows() != X2.rows())
        throw DimensionMismatch("kernel_gram: point dimensions differ");
    const Index n = k.out_dim();
    Matrix<Scalar> out(X.cols() * n, X2.cols() * n);
    for (Index i = 0; i < X.cols(); ++i)
        for (Index j = 0; j < X2.cols(); ++j)
            k.write_block(X.col(i), X2.col(j), out.block(i * n, j * n, n, n));
    return out;
}

/// Symmetric stacked gram k(X, X).
template <typename Scalar, typename A>
Matrix<Scalar> kernel_gram(const MatrixKernel<Scalar> & k, const Eigen::MatrixBase<A> & X)
{
    const Index n = k.out_dim();
    Matrix<Scalar> out(X.cols() * n, X.cols() * n);
    for (Index i = 0; i < X.cols(); ++i) {
        for (Index j = 0; j <= i; ++j) {
            k.write_block(X.col(i), X.col(j), out.block(i * n, j * n, n, n));
            if (j != i)
                out.block(j * n, i * n, n, n) = out.block(i * n, j * n, n, n).transpose();
        }
    }
    return out;
}

} // namespace gpdyn

#endif
