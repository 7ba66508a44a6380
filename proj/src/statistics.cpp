#include "gpdyn/statistics.hpp"

#include <algorithm>
#include <cmath>

namespace gpdyn {

std::vector<StepStatistics> empirical_moments(const TrajectoryBatch & batch)
{
    const std::size_t count = batch.samples();
    if (count < 2)
        throw InsufficientSamples("empirical moments need at least two trajectories, got " + std::to_string(count));
    const Index n = batch.state_dim;
    const double ns = static_cast<double>(count);

    std::vector<StepStatistics> out(static_cast<std::size_t>(batch.horizon) + 1);
    for (Index k = 0; k <= batch.horizon; ++k) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
        for (const auto & s : batch.states)
            mean += s.col(k);
        mean /= ns;

        Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd fourth = Eigen::VectorXd::Zero(n);
        for (const auto & s : batch.states) {
            const Eigen::VectorXd d = s.col(k) - mean;
            scatter.noalias() += d * d.transpose();
            fourth += d.array().pow(4).matrix();
        }

        StepStatistics & st = out[static_cast<std::size_t>(k)];
        st.mean = mean;
        st.covariance = scatter / (ns - 1.0);
        st.mean_stderr = (st.covariance.diagonal().array() / ns).sqrt();
        // Var(s^2) ~ (m4 - (N-3)/(N-1) s^4) / N
        const Eigen::ArrayXd var = st.covariance.diagonal().array();
        const Eigen::ArrayXd m4 = fourth.array() / ns;
        st.variance_stderr = ((m4 - (ns - 3.0) / (ns - 1.0) * var.square()) / ns).max(0.0).sqrt().matrix();
    }
    return out;
}

} // namespace gpdyn
