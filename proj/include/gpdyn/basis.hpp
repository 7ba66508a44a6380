/**
 * @file basis.hpp
 * @brief Finite basis-function approximations of the GP and simulation with
 * explicit approximate function samples.
 *
 * f(z) ~= Phi(z) theta with theta ~ N(mu_theta, Sigma_theta). A drawn theta is
 * a deterministic function that is frozen for a whole rollout, so the cost of
 * a trajectory is linear in the horizon.
 */

#ifndef GPDYN_BASIS_HPP
#define GPDYN_BASIS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "gpdyn/kernel.hpp"
#include "gpdyn/linalg.hpp"
#include "gpdyn/mean.hpp"
#include "gpdyn/trajectory.hpp"

namespace gpdyn {

/// Scalar-output feature map z -> phi(z) in R^m.
class FeatureMap
{
public:
    /// phi_i = sigma_f sqrt(2/m) cos(omega_i^T z + b_i); frequencies is m x d.
    struct Fourier
    {
        double sigma_f;
        Eigen::MatrixXd frequencies;
        Eigen::VectorXd phases;
    };

    /// phi(z) = k(z, landmarks) * projection, with projection p x m.
    struct Nystrom
    {
        ScalarKernel<double> kernel;
        Eigen::MatrixXd landmarks;
        Eigen::VectorXd eigenvalues;   // of the gram scaled by 1/p, descending
        Eigen::MatrixXd projection;
    };

    /// phi(z) = sigma_f z.
    struct LinearExact
    {
        double sigma_f;
        Index dim;
    };

    /// phi(z) = scale * (z (x) phi_inner(z)), feature index a * m_inner + i.
    struct LinearTimes
    {
        std::shared_ptr<const FeatureMap> inner;
        double scale;
    };

    using Kind = std::variant<Fourier, Nystrom, LinearExact, LinearTimes>;

    explicit FeatureMap(Kind k);

    const Kind & kind() const { return kind_; }
    Index size() const;
    Index input_dim() const;
    Eigen::VectorXd operator()(const Eigen::VectorXd & z) const;

private:
    Kind kind_;
};

enum class ExpansionMode
{
    Residual,   // x+ = mu(z) + f~(z) + w
    Direct,     // x+ = f~(z) + w
};

/**
 * @brief Basis expansion of a (possibly vector-valued) GP.
 *
 * With independent outputs every output has its own map and weight block.
 * With a shared map (distance-coupled kernels) output a evaluates the single
 * map at [z; output_tags(a)] and all outputs share theta.
 */
struct BasisExpansion
{
    Index input_dim = 0;
    std::vector<FeatureMap> maps;
    bool shared = false;
    Eigen::VectorXd output_tags;
    GaussianDist<double> weights;

    Index out_dim() const;
    Index size() const;
    /// out_dim x size() matrix with f~(z) = design(z) * theta.
    Eigen::MatrixXd design(const Eigen::VectorXd & z) const;
};

struct FunctionSample
{
    std::shared_ptr<const BasisExpansion> expansion;
    Eigen::VectorXd theta;

    Eigen::VectorXd operator()(const Eigen::VectorXd & z) const { return expansion->design(z) * theta; }
};

/// Expansion with prior weights N(0, I) around the given maps.
BasisExpansion make_expansion(Index input_dim, std::vector<FeatureMap> maps, bool shared = false,
                              Eigen::VectorXd output_tags = {});

/// Random Fourier features of an SE kernel; draws use the BasisFeatures stream
/// (seed, index).
BasisExpansion rff_expansion(const ScalarKernel<double> & k, Index input_dim, Index m, std::uint64_t seed,
                             std::uint64_t index = 0);
FeatureMap rff_features(const ScalarKernel<double> & k, Index input_dim, Index m, std::uint64_t seed,
                        std::uint64_t index = 0);

/// Nystrom eigenfunctions from sample points (d x p), keeping the top m.
BasisExpansion nystrom_expansion(const ScalarKernel<double> & k, const Eigen::MatrixXd & sample_points, Index m);
FeatureMap nystrom_features(const ScalarKernel<double> & k, const Eigen::MatrixXd & sample_points, Index m);

/// p points uniform on [lo, hi]^d.
Eigen::MatrixXd uniform_points(Index input_dim, Index p, double lo, double hi, std::uint64_t seed,
                               std::uint64_t index = 0);

BasisExpansion linear_exact_expansion(const ScalarKernel<double> & k, Index input_dim);

/// phi_i(z) = scale * z * phi_i^inner(z); prior weights are reset.
BasisExpansion linear_times_base(const BasisExpansion & inner, double scale = 1.0);

enum class BasisConstruction
{
    Fourier,   // RFF for SE factors, exact features for linear factors
    Nystrom,
};

struct BasisOptions
{
    BasisConstruction construction = BasisConstruction::Fourier;
    Index m = 10;
    Index nystrom_points = 200;
    double nystrom_lo = -3.0;
    double nystrom_hi = 3.0;
};

/// Expansion of a full matrix kernel. Independent outputs get one map each,
/// drawn with stream index index * out_dim + a.
BasisExpansion expansion_for(const MatrixKernel<double> & k, Index input_dim, const BasisOptions & opts,
                             std::uint64_t seed, std::uint64_t index = 0);

/// Bayesian linear regression of the weights on (X: d x p, Y: n x p) with
/// observation noise Q (n x n), starting from the current weight law.
BasisExpansion condition_weights(const BasisExpansion & e, const Eigen::MatrixXd & X, const Eigen::MatrixXd & Y,
                                 const Eigen::MatrixXd & Q);

/// theta_i ~ N(mu_theta, Sigma_theta) from the BasisWeights stream (seed, i).
std::vector<FunctionSample> draw_function_samples(const BasisExpansion & e, std::size_t count, std::uint64_t seed);

/// As above, with a fresh expansion make(i) behind every sample.
std::vector<FunctionSample> draw_function_samples(const std::function<BasisExpansion(std::size_t)> & make,
                                                  std::size_t count, std::uint64_t seed, unsigned threads = 0);

struct AfsOptions
{
    ExpansionMode mode = ExpansionMode::Residual;
    unsigned threads = 0;
};

/// One trajectory per sample, process noise from the FunctionSampleNoise
/// stream. inputs is m x N for controlled systems and empty otherwise.
TrajectoryBatch simulate_with_function_samples(const MeanFn<double> & mean, const std::vector<FunctionSample> & samples,
                                               const Horizon<double> & h, const Eigen::MatrixXd & Q,
                                               std::uint64_t seed, const AfsOptions & opts = {},
                                               const Eigen::MatrixXd & inputs = {});

/**
 * @brief Text format for an expansion and optional drawn weights.
 *
 * Comma-separated records, one per line:
 *   expansion,<input_dim>,<shared 0|1>,<map count>
 *   tags,<t_1>,...                         (shared maps only)
 *   map,fourier,<sigma_f>,<m>,<d>  then m lines  freq,<omega_i1..omega_id>  and  phase,<b_1..b_m>
 *   map,linear,<sigma_f>,<d>
 *   map,linear_times,<scale>      followed by the inner map
 *   map,nystrom,<p>,<m>,<d>  then kernel records, p lines landmark,<z>, one line eig,<...>,
 *                            p lines proj,<row>
 *   kernel,se,<sigma_f>,<l> | kernel,linear,<sigma_f> | kernel,product  (two kernel records follow)
 *   weights_mean,<...>  and  size() lines  weights_cov,<row>
 *   theta,<...>                            (one per stored sample)
 */
void write_expansion(std::ostream & out, const BasisExpansion & e, const std::vector<Eigen::VectorXd> & thetas = {});

struct StoredExpansion
{
    BasisExpansion expansion;
    std::vector<Eigen::VectorXd> thetas;
};

StoredExpansion read_expansion(std::istream & in);

} // namespace gpdyn

#endif
