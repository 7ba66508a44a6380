#ifndef GPDYN_STATISTICS_HPP
#define GPDYN_STATISTICS_HPP

#include <vector>

#include <Eigen/Core>

#include "gpdyn/trajectory.hpp"

namespace gpdyn {

/// Sample moments of one step across a batch.
struct StepStatistics
{
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;        // unbiased
    Eigen::VectorXd mean_stderr;       // sd / sqrt(N_s)
    Eigen::VectorXd variance_stderr;   // from the fourth central moment
};

/// Per-step statistics for steps 0..N; needs at least two trajectories.
std::vector<StepStatistics> empirical_moments(const TrajectoryBatch & batch);

} // namespace gpdyn

#endif
