/**
 * @file experiment.hpp
 * @brief Runs configured methods and compares their per-step moments.
 */

#ifndef GPDYN_HARNESS_EXPERIMENT_HPP
#define GPDYN_HARNESS_EXPERIMENT_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gpdyn/harness/config.hpp"
#include "gpdyn/moments.hpp"
#include "gpdyn/statistics.hpp"
#include "gpdyn/trajectory.hpp"

namespace gpdyn::harness {

struct MethodResult
{
    MethodSpec method;
    /// n x (N + 1), column 0 is x0.
    Eigen::MatrixXd means;
    /// N + 1 per-step covariances, the first one zero.
    std::vector<Eigen::MatrixXd> covariances;
    /// Sampling methods only.
    std::vector<StepStatistics> statistics;
    std::optional<TrajectoryBatch> batch;
    std::optional<MomentSequence<double>> moments;
    double runtime_seconds = 0.0;
};

struct MethodDeviation
{
    std::string method;
    /// max over steps 1..N and state dims of |var - var_ref| / |var_ref|.
    double max_relative_variance_deviation = 0.0;
    /// trace of the terminal covariance over that of the reference.
    double terminal_variance_ratio = 1.0;
    bool underestimates = false;   // ratio < 0.5
};

struct ComparisonReport
{
    std::string reference;
    std::vector<MethodResult> results;
    std::vector<MethodDeviation> deviations;
    std::uint64_t seed = 0;
    std::string config_echo;
};

/// Simulates the proxy instead of using its closed form when simulate is set.
MethodResult run_method(const ExperimentConfig & cfg, const MethodSpec & method, const GpModel<double> & model,
                        const Eigen::MatrixXd & inputs, bool simulate_proxy = false);

/// Runs every configured method (concurrently) and compares against the
/// reference. Nothing is written.
ComparisonReport run_experiment(const ExperimentConfig & cfg);

double relative_deviation(double value, double reference);
std::vector<MethodDeviation> compare(const std::vector<MethodResult> & results, const std::string & reference);

/// `method,step,dim,mean,var,lower,upper` with two-sigma bounds.
std::string report_csv(const ComparisonReport & report);
std::string summary_text(const ComparisonReport & report);

/// <stem>_moments.csv, plus trajectories and the joint covariance when enabled.
void write_method_outputs(const MethodResult & result, const ExperimentConfig & cfg, bool trajectories);
/// All method outputs, report.csv and summary.txt.
void write_report(const ComparisonReport & report, const ExperimentConfig & cfg);

} // namespace gpdyn::harness

#endif
