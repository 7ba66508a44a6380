/**
 * @file config.hpp
 * @brief Experiment configuration: a flat `key = value` file with dotted keys.
 *
 * Unknown keys, duplicates and out-of-range values are rejected with the
 * offending field and line. Every key has a default; defaults are logged,
 * and those not taken from the reference setups are marked not-from-paper.
 */

#ifndef GPDYN_HARNESS_CONFIG_HPP
#define GPDYN_HARNESS_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gpdyn/basis.hpp"
#include "gpdyn/gp_model.hpp"
#include "gpdyn/proxy.hpp"

namespace gpdyn::harness {

enum class MethodKind
{
    GroundTruth,
    Afs,
    Linearized,
    Independent,
    Proxy,
};

struct MethodSpec
{
    MethodKind kind = MethodKind::GroundTruth;
    ProxyVariant variant = ProxyVariant::ConstantOffset;   // Proxy only

    /// ground_truth, afs, linearized, independent or proxy:<variant>.
    std::string name() const;
    /// name() with ':' replaced, for file names.
    std::string file_stem() const;
    bool sampling() const { return kind == MethodKind::GroundTruth || kind == MethodKind::Afs; }

    static MethodSpec parse(std::string_view text);
    friend bool operator==(const MethodSpec &, const MethodSpec &) = default;
};

enum class Resampling
{
    PerSample,
    Shared,
};

struct ExperimentConfig
{
    std::string preset;

    std::string mean = "linear";          // linear | zero
    double gain = 0.95;
    double input_gain = 1.0;
    std::string kernel = "se";            // se | linear | linear_se
    double sigma_f = 1.0;
    double lengthscale = 10.0;
    Index outputs = 1;
    std::string coupling = "independent"; // independent | distance
    double noise = 1.0;                   // Q = noise * I
    std::filesystem::path training_data;

    Index steps = 50;
    std::vector<double> x0{1.0};
    std::filesystem::path inputs_path;

    std::vector<MethodSpec> methods;
    std::size_t samples = 20000;
    std::uint64_t seed = 42;

    BasisOptions basis;
    ExpansionMode basis_mode = ExpansionMode::Residual;
    Resampling resample = Resampling::PerSample;

    std::string reference;
    std::filesystem::path output_dir = "out";
    bool full_covariance = false;
    bool write_trajectories = false;
    Index kernel_check_points = 50;

    /// Keys that were left at their default.
    std::vector<std::string> defaulted;
};

/// Parses a config file; relative paths resolve against its directory.
ExperimentConfig parse_config(const std::filesystem::path & path);
ExperimentConfig parse_config_text(std::string_view text, const std::filesystem::path & base_dir = {});

/// fig2-1a, fig2-1b, fig2-2a or fig2-2b.
ExperimentConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Canonical `key = value` dump, stable across runs.
std::string echo(const ExperimentConfig & cfg);

/// Writes each defaulted key to the log with its provenance marker.
void log_defaults(const ExperimentConfig & cfg);

/// Cross-field checks shared by the parser and the CLI overrides.
void validate(const ExperimentConfig & cfg);

GpModel<double> build_model(const ExperimentConfig & cfg);
/// Control inputs as m x N; empty for autonomous systems.
Eigen::MatrixXd load_inputs(const ExperimentConfig & cfg);
/// Proxy parameters implied by the scalar model settings.
ProxySpec proxy_spec(const ExperimentConfig & cfg, ProxyVariant v);

} // namespace gpdyn::harness

#endif
