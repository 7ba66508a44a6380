// gpdyn: trajectory sampling and moment propagation for GP dynamics models.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error, 3 numeric failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gpdyn/basis.hpp"
#include "gpdyn/csv.hpp"
#include "gpdyn/error.hpp"
#include "gpdyn/harness/config.hpp"
#include "gpdyn/harness/experiment.hpp"
#include "gpdyn/random.hpp"

namespace {

using namespace gpdyn;
using namespace gpdyn::harness;

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;

struct CommonOptions
{
    std::string config;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App & cmd, CommonOptions & o)
{
    cmd.add_option("--config", o.config, "Experiment config file (flat key = value)");
    cmd.add_option("--preset", o.preset, "Reproduction preset: fig2-1a, fig2-1b, fig2-2a, fig2-2b");
    cmd.add_option("--seed", o.seed, "Master seed (overrides the config)");
    cmd.add_option("--out", o.out, "Output directory (overrides the config)");
}

ExperimentConfig load(const CommonOptions & o)
{
    if (!o.config.empty() && !o.preset.empty())
        throw ConfigInvalid("preset", "use either --config or --preset; a config file may start from a preset with "
                                      "'preset = <name>'");
    ExperimentConfig cfg = !o.config.empty()   ? parse_config(o.config)
                           : !o.preset.empty() ? preset(o.preset)
                                               : parse_config_text("");
    if (o.seed) {
        cfg.seed = *o.seed;
        std::erase(cfg.defaulted, "seed");
    }
    if (!o.out.empty()) {
        cfg.output_dir = o.out;
        std::erase(cfg.defaulted, "output.dir");
    }
    validate(cfg);
    log_defaults(cfg);
    return cfg;
}

void print_runtime(const MethodResult & r)
{
    std::printf("%-16s %10.3f s\n", r.method.name().c_str(), r.runtime_seconds);
}

int cmd_simulate(const CommonOptions & o, const std::string & method_name)
{
    auto cfg = load(o);
    MethodSpec method;
    try {
        method = MethodSpec::parse(method_name);
    } catch (const Error & e) {
        throw ConfigInvalid("--method", e.what());
    }
    if (!method.sampling() && method.kind != MethodKind::Proxy)
        throw ConfigInvalid("--method", "simulate needs ground_truth, afs or proxy:<variant>; use propagate for " +
                                            method.name());
    if (method.kind == MethodKind::Proxy) {
        cfg.methods = {method};
        cfg.reference = method.name();
        validate(cfg);
    }
    const auto model = build_model(cfg);
    const auto result = run_method(cfg, method, model, load_inputs(cfg), true);
    write_method_outputs(result, cfg, true);
    print_runtime(result);
    return 0;
}

int cmd_propagate(const CommonOptions & o)
{
    auto cfg = load(o);
    std::vector<MethodSpec> methods;
    for (const auto & m : cfg.methods)
        if (m.kind == MethodKind::Linearized || m.kind == MethodKind::Independent)
            methods.push_back(m);
    if (methods.empty())
        methods = {MethodSpec{MethodKind::Linearized}, MethodSpec{MethodKind::Independent}};
    const auto model = build_model(cfg);
    const auto inputs = load_inputs(cfg);
    for (const auto & m : methods) {
        const auto result = run_method(cfg, m, model, inputs);
        if (result.moments && result.moments->repaired)
            spdlog::warn("{}: covariance was repaired to be positive semidefinite", m.name());
        write_method_outputs(result, cfg, false);
        print_runtime(result);
    }
    return 0;
}

int cmd_compare(const CommonOptions & o)
{
    const auto cfg = load(o);
    const auto report = run_experiment(cfg);
    write_report(report, cfg);
    for (const auto & r : report.results)
        print_runtime(r);
    std::cout << '\n' << summary_text(report);
    return 0;
}

int cmd_kernel_check(const CommonOptions & o)
{
    const auto cfg = load(o);
    const auto model = build_model(cfg);
    const Index d = model.input_dim();
    const Eigen::MatrixXd points = [&] {
        NormalStream stream(cfg.seed, StreamTag::Diagnostics, 0);
        Eigen::MatrixXd p(d, cfg.kernel_check_points);
        for (Index j = 0; j < p.cols(); ++j)
            for (Index i = 0; i < d; ++i)
                p(i, j) = stream.uniform(cfg.basis.nystrom_lo, cfg.basis.nystrom_hi);
        return p;
    }();

    const Eigen::MatrixXd gram = model.gram(points);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double scale = gram.trace() / static_cast<double>(gram.rows());
    const double min_eig = eig.eigenvalues().minCoeff();
    const double max_eig = eig.eigenvalues().maxCoeff();
    const double asym = (gram - gram.transpose()).cwiseAbs().maxCoeff();
    const auto factor = cholesky(gram, model.jitter_policy());

    // Expected gram of the basis approximation, Phi Sigma_theta Phi^T, against
    // the exact prior gram.
    const auto prior = model.prior();
    const Eigen::MatrixXd exact = prior.gram(points);
    const auto expansion = expansion_for(model.kernel(), d, cfg.basis, cfg.seed, 0);
    const Index n = model.state_dim();
    Eigen::MatrixXd phi(points.cols() * n, expansion.size());
    for (Index j = 0; j < points.cols(); ++j)
        phi.middleRows(j * n, n) = expansion.design(points.col(j));
    const Eigen::MatrixXd approx = phi * expansion.weights.cov * phi.transpose();

    using csv::format_number;
    std::string out = "check,value\n";
    auto row = [&](const std::string & k, const std::string & v) { out += k + ',' + v + '\n'; };
    row("points", std::to_string(points.cols()));
    row("gram_dim", std::to_string(gram.rows()));
    row("max_asymmetry", format_number(asym));
    row("min_eigenvalue", format_number(min_eig));
    row("max_eigenvalue", format_number(max_eig));
    row("relative_min_eigenvalue", format_number(scale > 0 ? min_eig / scale : 0.0));
    row("cholesky_jitter", format_number(factor.jitter_used()));
    row("basis_construction", cfg.basis.construction == BasisConstruction::Fourier ? "rff" : "nystrom");
    row("basis_features", std::to_string(expansion.size()));
    row("basis_relative_frobenius_error", format_number(exact.norm() > 0 ? (approx - exact).norm() / exact.norm() : 0.0));
    row("basis_max_abs_error", format_number((approx - exact).cwiseAbs().maxCoeff()));
    csv::write_file_atomic(cfg.output_dir / "kernel_check.csv", out);
    std::cout << out;
    return 0;
}

} // namespace

int main(int argc, char ** argv)
{
    spdlog::set_default_logger(spdlog::stderr_color_st("gpdyn"));

    CLI::App app{"Trajectory sampling and moment propagation for Gaussian-process dynamics"};
    app.require_subcommand(1);
    app.fallthrough();
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

    CommonOptions common;
    std::string method;
    auto * sim = app.add_subcommand("simulate", "Sample trajectories with one method");
    add_common(*sim, common);
    sim->add_option("--method", method, "ground_truth, afs or proxy:<1a|1b|2a|2b>")->required();
    auto * prop = app.add_subcommand("propagate", "Moment propagation (linearized and independence baseline)");
    add_common(*prop, common);
    auto * cmp = app.add_subcommand("compare", "Run all configured methods and write the comparison report");
    add_common(*cmp, common);
    auto * kc = app.add_subcommand("kernel-check", "Kernel PSD and basis reconstruction diagnostics");
    add_common(*kc, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError & e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }
    if (quiet)
        spdlog::set_level(spdlog::level::warn);

    try {
        if (sim->parsed())
            return cmd_simulate(common, method);
        if (prop->parsed())
            return cmd_propagate(common);
        if (cmp->parsed())
            return cmd_compare(common);
        return cmd_kernel_check(common);
    } catch (const ConfigInvalid & e) {
        spdlog::error("configuration error: {}", e.what());
        return exit_config;
    } catch (const DimensionMismatch & e) {
        spdlog::error("configuration error: {}", e.what());
        return exit_config;
    } catch (const UnsupportedMethod & e) {
        spdlog::error("configuration error: {}", e.what());
        return exit_config;
    } catch (const NotPositiveDefinite & e) {
        spdlog::error("numeric failure: {}", e.what());
        return exit_numeric;
    } catch (const NonFinite & e) {
        spdlog::error("numeric failure: {}", e.what());
        return exit_numeric;
    } catch (const DegenerateSpectrum & e) {
        spdlog::error("numeric failure: {} (achievable: {})", e.what(), e.achievable());
        return exit_numeric;
    } catch (const InsufficientSamples & e) {
        spdlog::error("numeric failure: {}", e.what());
        return exit_numeric;
    } catch (const std::exception & e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}
