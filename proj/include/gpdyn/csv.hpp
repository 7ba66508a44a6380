/**
 * @file csv.hpp
 * @brief CSV formats for trajectories, moments and matrices.
 *
 * Numbers are written in shortest round-trip form so files reload bit-exactly
 * and identical runs give identical bytes.
 */

#ifndef GPDYN_CSV_HPP
#define GPDYN_CSV_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gpdyn/moments.hpp"
#include "gpdyn/statistics.hpp"
#include "gpdyn/trajectory.hpp"

namespace gpdyn::csv {

std::string format_number(double v);
double parse_number(std::string_view text);
std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Writes to a temporary sibling and renames it over the target.
void write_file_atomic(const std::filesystem::path & path, const std::string & content);
std::string read_file(const std::filesystem::path & path);

/// Header `traj,step,x1..xn`; one row per (trajectory, step).
std::string trajectories(const TrajectoryBatch & batch);

/// Header `step,mean_1..mean_n,var_11,var_12,..,var_nn`; row 0 is x0 with
/// zero covariance.
std::string moments(const Eigen::MatrixXd & means, const std::vector<Eigen::MatrixXd> & covariances);
std::string moments(const MomentSequence<double> & ms);
std::string moments(const std::vector<StepStatistics> & stats);

/// Plain numeric matrix, one row per line, no header.
std::string matrix(const Eigen::MatrixXd & m);

/// Numeric rows of a file; blank lines and lines starting with '#' are
/// skipped, as is a first line that does not parse as numbers.
Eigen::MatrixXd read_matrix(const std::filesystem::path & path);

struct TrainingSet
{
    Eigen::MatrixXd inputs;    // input_dim x p
    Eigen::MatrixXd targets;   // out_dim x p
};

/// Rows `z_1..z_d,y_1..y_n`.
TrainingSet read_training(const std::filesystem::path & path, Index input_dim, Index out_dim);

} // namespace gpdyn::csv

#endif
