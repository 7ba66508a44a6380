#include "gpdyn/harness/experiment.hpp"

#include <chrono>
#include <cmath>
#include <future>

#include <spdlog/spdlog.h>

#include "gpdyn/basis.hpp"
#include "gpdyn/csv.hpp"
#include "gpdyn/proxy.hpp"

namespace gpdyn::harness {

namespace {

using Eigen::MatrixXd;

void fill_from_statistics(MethodResult & r)
{
    r.means.resize(r.batch->state_dim, r.batch->horizon + 1);
    for (std::size_t k = 0; k < r.statistics.size(); ++k) {
        r.means.col(static_cast<Index>(k)) = r.statistics[k].mean;
        r.covariances.push_back(r.statistics[k].covariance);
    }
}

TrajectoryBatch run_afs(const ExperimentConfig & cfg, const GpModel<double> & model, const MatrixXd & inputs)
{
    const Index input_dim = model.input_dim();
    const auto * data = model.training_data();
    MatrixXd targets;
    if (data) {
        targets = data->targets;
        if (cfg.basis_mode == ExpansionMode::Residual)
            for (Index j = 0; j < targets.cols(); ++j)
                targets.col(j) -= model.mean()(data->inputs.col(j));
    }
    auto make = [&](std::size_t i) {
        auto e = expansion_for(model.kernel(), input_dim, cfg.basis, cfg.seed, i);
        if (data)
            e = condition_weights(e, data->inputs, targets, model.noise_cov());
        return e;
    };
    std::vector<FunctionSample> samples;
    if (cfg.resample == Resampling::PerSample)
        samples = draw_function_samples(make, cfg.samples, cfg.seed);
    else
        samples = draw_function_samples(make(0), cfg.samples, cfg.seed);
    AfsOptions opts;
    opts.mode = cfg.basis_mode;
    const Horizon<double> h(cfg.steps, Eigen::Map<const Eigen::VectorXd>(cfg.x0.data(), static_cast<Index>(cfg.x0.size())));
    return simulate_with_function_samples(model.mean(), samples, h, model.noise_cov(), cfg.seed, opts, inputs);
}

} // namespace

MethodResult run_method(const ExperimentConfig & cfg, const MethodSpec & method, const GpModel<double> & model,
                        const MatrixXd & inputs, bool simulate_proxy)
{
    const auto start = std::chrono::steady_clock::now();
    const Horizon<double> h(cfg.steps, Eigen::Map<const Eigen::VectorXd>(cfg.x0.data(), static_cast<Index>(cfg.x0.size())));
    const Index n = model.state_dim();
    MethodResult r;
    r.method = method;
    switch (method.kind) {
    case MethodKind::GroundTruth:
        r.batch = inputs.size() > 0 ? sample_trajectories_controlled(model, h, inputs, cfg.samples, cfg.seed)
                                    : sample_trajectories(model, h, cfg.samples, cfg.seed);
        break;
    case MethodKind::Afs: r.batch = run_afs(cfg, model, inputs); break;
    case MethodKind::Linearized:
    case MethodKind::Independent: {
        const bool lin = method.kind == MethodKind::Linearized;
        if (inputs.size() > 0)
            r.moments = lin ? propagate_linearized_controlled(model, h, inputs)
                            : propagate_independent_controlled(model, h, inputs);
        else
            r.moments = lin ? propagate_linearized(model, h) : propagate_independent(model, h);
        r.means = r.moments->means;
        r.covariances.push_back(MatrixXd::Zero(n, n));
        for (auto & m : marginals(*r.moments))
            r.covariances.push_back(std::move(m.cov));
        break;
    }
    case MethodKind::Proxy: {
        const auto spec = proxy_spec(cfg, method.variant);
        if (simulate_proxy) {
            r.batch = proxy_simulate(spec, cfg.samples, cfg.seed);
            break;
        }
        r.means.resize(1, cfg.steps + 1);
        const auto exact = proxy_moments_closed_form(spec);
        for (std::size_t k = 0; k < exact.size(); ++k) {
            r.means(0, static_cast<Index>(k)) = exact[k].mean;
            r.covariances.push_back(MatrixXd::Constant(1, 1, exact[k].variance));
        }
        break;
    }
    }
    if (r.batch) {
        r.statistics = empirical_moments(*r.batch);
        fill_from_statistics(r);
    }
    r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

ComparisonReport run_experiment(const ExperimentConfig & cfg)
{
    const auto model = build_model(cfg);
    const MatrixXd inputs = load_inputs(cfg);
    std::vector<std::future<MethodResult>> jobs;
    for (const auto & m : cfg.methods)
        jobs.push_back(std::async(std::launch::async, [&, m] { return run_method(cfg, m, model, inputs); }));

    ComparisonReport report;
    report.reference = cfg.reference;
    report.seed = cfg.seed;
    report.config_echo = echo(cfg);
    std::exception_ptr first_error;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        try {
            report.results.push_back(jobs[i].get());
        } catch (const std::exception & e) {
            spdlog::error("method {} failed: {}", cfg.methods[i].name(), e.what());
            if (!first_error)
                first_error = std::current_exception();
        }
    }
    if (first_error)
        std::rethrow_exception(first_error);
    report.deviations = compare(report.results, report.reference);
    return report;
}

double relative_deviation(double value, double reference)
{
    const double diff = std::abs(value - reference);
    return reference != 0.0 ? diff / std::abs(reference) : diff;
}

std::vector<MethodDeviation> compare(const std::vector<MethodResult> & results, const std::string & reference)
{
    const MethodResult * ref = nullptr;
    for (const auto & r : results)
        if (r.method.name() == reference)
            ref = &r;
    if (!ref)
        throw Error("reference method '" + reference + "' has no result");
    std::vector<MethodDeviation> out;
    for (const auto & r : results) {
        MethodDeviation d;
        d.method = r.method.name();
        for (std::size_t k = 1; k < r.covariances.size(); ++k)
            for (Index i = 0; i < r.covariances[k].rows(); ++i)
                d.max_relative_variance_deviation = std::max(
                    d.max_relative_variance_deviation, relative_deviation(r.covariances[k](i, i), ref->covariances[k](i, i)));
        const double t_ref = ref->covariances.back().trace();
        const double t = r.covariances.back().trace();
        d.terminal_variance_ratio = t_ref != 0.0 ? t / t_ref : (t == 0.0 ? 1.0 : INFINITY);
        d.underestimates = d.terminal_variance_ratio < 0.5;
        out.push_back(d);
    }
    return out;
}

std::string report_csv(const ComparisonReport & report)
{
    using csv::format_number;
    std::string out = "method,step,dim,mean,var,lower,upper\n";
    for (const auto & r : report.results)
        for (Index k = 0; k < r.means.cols(); ++k)
            for (Index i = 0; i < r.means.rows(); ++i) {
                const double m = r.means(i, k);
                const double v = r.covariances[static_cast<std::size_t>(k)](i, i);
                const double sd = std::sqrt(std::max(v, 0.0));
                out += r.method.name() + ',' + std::to_string(k) + ',' + std::to_string(i + 1) + ',' + format_number(m) +
                       ',' + format_number(v) + ',' + format_number(m - 2 * sd) + ',' + format_number(m + 2 * sd) + '\n';
            }
    return out;
}

std::string summary_text(const ComparisonReport & report)
{
    using csv::format_number;
    std::string out = "reference = " + report.reference + '\n';
    out += "seed = " + std::to_string(report.seed) + "\n\n";
    out += "method,max_relative_variance_deviation,terminal_variance_ratio,underestimates\n";
    for (const auto & d : report.deviations)
        out += d.method + ',' + format_number(d.max_relative_variance_deviation) + ',' +
               format_number(d.terminal_variance_ratio) + ',' + (d.underestimates ? "yes" : "no") + '\n';
    out += "\n# configuration\n" + report.config_echo;
    return out;
}

void write_method_outputs(const MethodResult & r, const ExperimentConfig & cfg, bool trajectories)
{
    const auto stem = r.method.file_stem();
    csv::write_file_atomic(cfg.output_dir / (stem + "_moments.csv"), csv::moments(r.means, r.covariances));
    if (trajectories && r.batch)
        csv::write_file_atomic(cfg.output_dir / (stem + "_trajectories.csv"), csv::trajectories(*r.batch));
    if (cfg.full_covariance && r.moments && r.moments->method == MomentMethod::LinearizedJoint)
        csv::write_file_atomic(cfg.output_dir / (stem + "_covariance.csv"), csv::matrix(r.moments->cov));
}

void write_report(const ComparisonReport & report, const ExperimentConfig & cfg)
{
    for (const auto & r : report.results)
        write_method_outputs(r, cfg, cfg.write_trajectories);
    csv::write_file_atomic(cfg.output_dir / "report.csv", report_csv(report));
    csv::write_file_atomic(cfg.output_dir / "summary.txt", summary_text(report));
}

} // namespace gpdyn::harness
