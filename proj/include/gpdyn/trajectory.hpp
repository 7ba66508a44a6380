/**
 * @file trajectory.hpp
 * @brief Exact ("ground truth") trajectory sampling for GP dynamics.
 *
 * Each trajectory is drawn from the joint law of X_{1:N} by growing one
 * Cholesky factor of k(X_{0:k}, X_{0:k}) + I (x) Q a block row per step, so
 * the total work per trajectory is that of a single factorization.
 */

#ifndef GPDYN_TRAJECTORY_HPP
#define GPDYN_TRAJECTORY_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gpdyn/gp_model.hpp"
#include "gpdyn/linalg.hpp"

namespace gpdyn {

enum class MethodTag
{
    GroundTruth,
    ApproxFunctionSample,
    ProxyReference,
};

std::string to_string(MethodTag tag);

/// Divergence threshold on |x|.
inline constexpr double divergence_bound = 1e100;

struct TrajectoryBatch
{
    Index state_dim = 0;
    Index horizon = 0;
    /// One state_dim x (horizon + 1) matrix per trajectory; column 0 is x0.
    std::vector<Eigen::MatrixXd> states;
    std::uint64_t seed = 0;
    MethodTag method = MethodTag::GroundTruth;
    /// input_dim x horizon; empty for autonomous systems.
    Eigen::MatrixXd inputs;
    /// Per-trajectory factors, kept only when requested.
    std::shared_ptr<const std::vector<CholFactor<double>>> factors;

    std::size_t samples() const { return states.size(); }
};

struct SamplerOptions
{
    bool retain_factors = false;
    unsigned threads = 0;   // 0: hardware concurrency
};

TrajectoryBatch sample_trajectories(const GpModel<double> & model, const Horizon<double> & horizon,
                                    std::size_t samples, std::uint64_t seed, const SamplerOptions & options = {});

/// Controlled variant: the GP is defined over z = [x; u], inputs is m x N.
/// The standard-normal draws depend only on the seed, never on the inputs.
TrajectoryBatch sample_trajectories_controlled(const GpModel<double> & model, const Horizon<double> & horizon,
                                               const Eigen::MatrixXd & inputs, std::size_t samples,
                                               std::uint64_t seed, const SamplerOptions & options = {});

/// Lengthens a ground-truth batch by extra_steps; the existing states are
/// left untouched and the result equals a single run over the longer horizon.
TrajectoryBatch resume_extend(const TrajectoryBatch & batch, const GpModel<double> & model, Index extra_steps,
                              const Eigen::MatrixXd & extra_inputs = Eigen::MatrixXd(),
                              const SamplerOptions & options = {});

} // namespace gpdyn

#endif
