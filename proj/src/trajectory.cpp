#include "gpdyn/trajectory.hpp"

#include <cmath>

#include "gpdyn/parallel.hpp"
#include "gpdyn/random.hpp"

namespace gpdyn {

std::string to_string(MethodTag tag)
{
    switch (tag) {
    case MethodTag::GroundTruth: return "ground_truth";
    case MethodTag::ApproxFunctionSample: return "afs";
    case MethodTag::ProxyReference: return "proxy";
    }
    return "unknown";
}

namespace {

// Sampling state of one trajectory.
class TrajectoryRecursion
{
public:
    TrajectoryRecursion(const GpModel<double> & model, std::uint64_t seed, std::size_t index, Index capacity)
        : model_(model)
        , stream_(seed, StreamTag::TrajectoryNoise, index)
        , n_(model.state_dim())
    {
        points_.resize(model.input_dim(), capacity);
        draws_.resize(capacity * n_);
        if (model.conditioned())
            whitened_.resize(model.training_data()->factor.dim(), capacity * n_);
        const Eigen::MatrixXd & q = model.noise_cov();
        singular_noise_ = Eigen::LLT<Eigen::MatrixXd>(q).info() != Eigen::Success;
    }

    Index count() const { return count_; }
    const CholFactor<double> & factor() const { return factor_; }

    // Adds visited point z_k (state and input), draws w_k and returns x_{k+1}.
    Eigen::VectorXd step(const Eigen::VectorXd & z, const CholFactor<double> * retained = nullptr)
    {
        const Index k = count_;
        if (k == points_.cols()) {
            points_.conservativeResize(Eigen::NoChange, 2 * k + 1);
            draws_.conservativeResize((2 * k + 1) * n_);
            if (model_.conditioned())
                whitened_.conservativeResize(Eigen::NoChange, (2 * k + 1) * n_);
        }
        points_.col(k) = z;

        Eigen::MatrixXd v;
        if (model_.conditioned()) {
            v = model_.whitened_cross(z);
            whitened_.middleCols(k * n_, n_) = v;
        }
        if (retained == nullptr) {
            const auto previous = points_.leftCols(k);
            Eigen::MatrixXd cross = kernel_gram(model_.kernel(), previous, z);
            Eigen::MatrixXd corner = model_.kernel()(z, z);
            // Without process noise, states visited in a row are almost fully
            // correlated; jittering only the rows that fail leaves the factor
            // so ill-conditioned that later solves blow up. A standing nugget
            // at the bottom ladder rung keeps every row well posed.
            const Eigen::VectorXd nugget = singular_noise_
                                               ? Eigen::VectorXd(model_.jitter_policy().min_relative * corner.diagonal())
                                               : Eigen::VectorXd::Zero(n_);
            if (model_.conditioned()) {
                if (k > 0)
                    cross.noalias() -= whitened_.leftCols(k * n_).transpose() * v;
                corner.noalias() -= v.transpose() * v;
            }
            corner = 0.5 * (corner + corner.transpose()).eval();
            corner += model_.noise_cov();
            corner.diagonal() += nugget;
            factor_.extend(cross, corner, model_.jitter_policy());
        }
        const CholFactor<double> & factor = retained ? *retained : factor_;

        draws_.segment(k * n_, n_) = stream_.next(n_);
        ++count_;
        const Index dim = count_ * n_;
        return model_.posterior_mean(z)
               + factor.lower().block(k * n_, 0, n_, dim) * draws_.head(dim);
    }

    CholFactor<double> release_factor() { return std::move(factor_); }
    void adopt_factor(CholFactor<double> f) { factor_ = std::move(f); }

private:
    const GpModel<double> & model_;
    NormalStream stream_;
    Index n_;
    Index count_ = 0;
    bool singular_noise_ = false;
    Eigen::MatrixXd points_;
    Eigen::VectorXd draws_;
    Eigen::MatrixXd whitened_;
    CholFactor<double> factor_;
};

Eigen::VectorXd stack_point(const Eigen::VectorXd & x, const Eigen::MatrixXd & inputs, Index k)
{
    if (inputs.rows() == 0)
        return x;
    Eigen::VectorXd z(x.size() + inputs.rows());
    z << x, inputs.col(k);
    return z;
}

void check_finite(const Eigen::VectorXd & x, std::size_t trajectory, Index step)
{
    for (Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x(i)) || std::abs(x(i)) > divergence_bound)
            throw NonFinite("trajectory " + std::to_string(trajectory) + " diverged", static_cast<std::size_t>(step));
}

void check_model(const GpModel<double> & model, const Horizon<double> & horizon, const Eigen::MatrixXd & inputs)
{
    if (horizon.steps < 1)
        throw Error("horizon must have at least one step");
    if (horizon.x0.size() != model.state_dim())
        throw DimensionMismatch("initial state length does not match the model state dimension");
    if (model.input_dim() != model.state_dim() + inputs.rows())
        throw DimensionMismatch("model input dimension must equal state dimension plus control dimension");
    if (inputs.rows() > 0 && inputs.cols() < horizon.steps)
        throw DimensionMismatch("control sequence is shorter than the horizon");
}

TrajectoryBatch run_sampler(const GpModel<double> & model, const Horizon<double> & horizon,
                            const Eigen::MatrixXd & inputs, std::size_t samples, std::uint64_t seed,
                            const SamplerOptions & options)
{
    check_model(model, horizon, inputs);
    if (samples < 1)
        throw Error("sample count must be at least one");

    TrajectoryBatch batch;
    batch.state_dim = model.state_dim();
    batch.horizon = horizon.steps;
    batch.seed = seed;
    batch.method = MethodTag::GroundTruth;
    batch.inputs = inputs.rows() > 0 ? Eigen::MatrixXd(inputs.leftCols(horizon.steps)) : Eigen::MatrixXd();
    batch.states.resize(samples);
    std::vector<CholFactor<double>> factors(options.retain_factors ? samples : 0);

    parallel_for(samples, [&](std::size_t i) {
        TrajectoryRecursion rec(model, seed, i, horizon.steps);
        Eigen::MatrixXd & states = batch.states[i];
        states.resize(batch.state_dim, horizon.steps + 1);
        states.col(0) = horizon.x0;
        for (Index k = 0; k < horizon.steps; ++k) {
            states.col(k + 1) = rec.step(stack_point(states.col(k), batch.inputs, k));
            check_finite(states.col(k + 1), i, k + 1);
        }
        if (options.retain_factors)
            factors[i] = rec.release_factor();
    }, options.threads);

    if (options.retain_factors)
        batch.factors = std::make_shared<const std::vector<CholFactor<double>>>(std::move(factors));
    return batch;
}

} // namespace

TrajectoryBatch sample_trajectories(const GpModel<double> & model, const Horizon<double> & horizon,
                                    std::size_t samples, std::uint64_t seed, const SamplerOptions & options)
{
    return run_sampler(model, horizon, Eigen::MatrixXd(), samples, seed, options);
}

TrajectoryBatch sample_trajectories_controlled(const GpModel<double> & model, const Horizon<double> & horizon,
                                               const Eigen::MatrixXd & inputs, std::size_t samples,
                                               std::uint64_t seed, const SamplerOptions & options)
{
    if (inputs.rows() == 0)
        throw DimensionMismatch("controlled sampling needs a nonempty input sequence");
    return run_sampler(model, horizon, inputs, samples, seed, options);
}

TrajectoryBatch resume_extend(const TrajectoryBatch & batch, const GpModel<double> & model, Index extra_steps,
                              const Eigen::MatrixXd & extra_inputs, const SamplerOptions & options)
{
    if (batch.method != MethodTag::GroundTruth)
        throw UnsupportedMethod("resume_extend: only ground-truth batches can be extended, got "
                                + to_string(batch.method));
    if (extra_steps < 0)
        throw Error("resume_extend: extra_steps must be nonnegative");
    if (extra_steps == 0)
        return batch;

    const Index total = batch.horizon + extra_steps;
    Eigen::MatrixXd inputs;
    if (batch.inputs.rows() > 0) {
        if (extra_inputs.rows() != batch.inputs.rows() || extra_inputs.cols() < extra_steps)
            throw DimensionMismatch("resume_extend: controlled batch needs inputs for the extra steps");
        inputs.resize(batch.inputs.rows(), total);
        inputs << batch.inputs, extra_inputs.leftCols(extra_steps);
    }
    if (batch.samples() > 0)
        check_model(model, Horizon<double>(total, batch.states.front().col(0)), inputs);
    const bool have_factors = batch.factors && batch.factors->size() == batch.samples();

    TrajectoryBatch out = batch;
    out.horizon = total;
    out.inputs = inputs;
    std::vector<CholFactor<double>> factors(options.retain_factors ? batch.samples() : 0);

    parallel_for(batch.samples(), [&](std::size_t i) {
        TrajectoryRecursion rec(model, batch.seed, i, total);
        const Eigen::MatrixXd & old_states = batch.states[i];
        // Replay the recorded prefix: same points, same draws, same factor.
        if (have_factors)
            rec.adopt_factor((*batch.factors)[i]);
        for (Index k = 0; k < batch.horizon; ++k) {
            const auto & retained = have_factors ? &(*batch.factors)[i] : nullptr;
            (void)rec.step(stack_point(old_states.col(k), inputs, k), retained);
        }
        Eigen::MatrixXd states(batch.state_dim, total + 1);
        states.leftCols(batch.horizon + 1) = old_states;
        for (Index k = batch.horizon; k < total; ++k) {
            states.col(k + 1) = rec.step(stack_point(states.col(k), inputs, k));
            check_finite(states.col(k + 1), i, k + 1);
        }
        out.states[i] = std::move(states);
        if (options.retain_factors)
            factors[i] = rec.release_factor();
    }, options.threads);

    out.factors = options.retain_factors
                      ? std::make_shared<const std::vector<CholFactor<double>>>(std::move(factors))
                      : nullptr;
    return out;
}

} // namespace gpdyn
