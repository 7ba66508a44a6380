#ifndef GPDYN_MEAN_HPP
#define GPDYN_MEAN_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <type_traits>
#include <variant>

#include <Eigen/Core>

#include "gpdyn/error.hpp"
#include "gpdyn/linalg.hpp"

namespace gpdyn {

/**
 * @brief GP mean function mu: R^d -> R^n.
 *
 * d is the input dimension (state, or stacked state and input for controlled
 * systems) and n the output dimension. Callbacks must be re-entrant: they may
 * be called concurrently from several sampling threads.
 */
template <typename Scalar = double>
class MeanFn
{
public:
    using Evaluator = std::function<Vector<Scalar>(const Vector<Scalar> &)>;
    using JacobianFn = std::function<Matrix<Scalar>(const Vector<Scalar> &)>;

    struct Zero
    {
        Index in_dim;
        Index out_dim;
    };

    /// x -> G x, G is out_dim x in_dim.
    struct LinearMap
    {
        Matrix<Scalar> gain;
    };

    struct Callback
    {
        Index in_dim;
        Index out_dim;
        Evaluator f;
        JacobianFn jacobian;   // may be empty
    };

    using Variant = std::variant<Zero, LinearMap, Callback>;

    static MeanFn zero(Index n) { return MeanFn(Zero{n, n}); }
    static MeanFn zero(Index in_dim, Index out_dim) { return MeanFn(Zero{in_dim, out_dim}); }
    static MeanFn linear_map(Matrix<Scalar> gain) { return MeanFn(LinearMap{std::move(gain)}); }
    static MeanFn callback(Index in_dim, Index out_dim, Evaluator f, JacobianFn jacobian = {})
    {
        return MeanFn(Callback{in_dim, out_dim, std::move(f), std::move(jacobian)});
    }

    const Variant & variant() const { return variant_; }

    Index in_dim() const
    {
        return std::visit(
            [](const auto & m) -> Index {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LinearMap>)
                    return m.gain.cols();
                else
                    return m.in_dim;
            },
            variant_);
    }

    Index out_dim() const
    {
        return std::visit(
            [](const auto & m) -> Index {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LinearMap>)
                    return m.gain.rows();
                else
                    return m.out_dim;
            },
            variant_);
    }

    template <typename A>
    Vector<Scalar> operator()(const Eigen::MatrixBase<A> & x) const
    {
        check_input(x.size());
        if (const auto * z = std::get_if<Zero>(&variant_))
            return Vector<Scalar>::Zero(z->out_dim);
        if (const auto * lin = std::get_if<LinearMap>(&variant_))
            return lin->gain * x;
        const auto & cb = std::get<Callback>(variant_);
        Vector<Scalar> y = cb.f(Vector<Scalar>(x));
        if (y.size() != cb.out_dim)
            throw DimensionMismatch("mean callback returned a vector of the wrong length");
        return y;
    }

    /// d mu / dx, out_dim x in_dim. Callbacks without an analytic Jacobian use
    /// central differences with h_i = max(1e-6, 1e-6 |x_i|).
    template <typename A>
    Matrix<Scalar> jacobian(const Eigen::MatrixBase<A> & x) const
    {
        check_input(x.size());
        if (const auto * z = std::get_if<Zero>(&variant_))
            return Matrix<Scalar>::Zero(z->out_dim, z->in_dim);
        if (const auto * lin = std::get_if<LinearMap>(&variant_))
            return lin->gain;
        const auto & cb = std::get<Callback>(variant_);
        if (cb.jacobian)
            return cb.jacobian(Vector<Scalar>(x));
        return central_difference(cb.f, Vector<Scalar>(x), cb.out_dim);
    }

    static Matrix<Scalar> central_difference(const Evaluator & f, const Vector<Scalar> & x, Index out_dim)
    {
        Matrix<Scalar> jac(out_dim, x.size());
        Vector<Scalar> probe = x;
        for (Index i = 0; i < x.size(); ++i) {
            const Scalar h = std::max(Scalar(1e-6), Scalar(1e-6) * std::abs(x(i)));
            probe(i) = x(i) + h;
            const Vector<Scalar> up = f(probe);
            probe(i) = x(i) - h;
            const Vector<Scalar> down = f(probe);
            probe(i) = x(i);
            jac.col(i) = (up - down) / (Scalar(2) * h);
        }
        return jac;
    }

private:
    explicit MeanFn(Variant v)
        : variant_(std::move(v))
    {}

    void check_input(Index size) const
    {
        if (size != in_dim())
            throw DimensionMismatch("mean evaluation: input has length " + std::to_string(size) + ", expected "
                                    + std::to_string(in_dim()));
    }

    Variant variant_;
};

template <typename Scalar, typename A>
Vector<Scalar> mean_eval(const MeanFn<Scalar> & mu, const Eigen::MatrixBase<A> & x)
{
    return mu(x);
}

/// mu applied to every column of X, stacked into one vector.
template <typename Scalar, typename A>
Vector<Scalar> mean_eval_stacked(const MeanFn<Scalar> & mu, const Eigen::MatrixBase<A> & X)
{
    const Index n = mu.out_dim();
    Vector<Scalar> out(X.cols() * n);
    for (Index i = 0; i < X.cols(); ++i)
        out.segment(i * n, n) = mu(X.col(i));
    return out;
}

template <typename Scalar, typename A>
Matrix<Scalar> mean_jacobian(const MeanFn<Scalar> & mu, const Eigen::MatrixBase<A> & x)
{
    return mu.jacobian(x);
}

} // namespace gpdyn

#endif
