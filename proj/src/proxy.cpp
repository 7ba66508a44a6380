#include "gpdyn/proxy.hpp"

#include <cmath>

#include "gpdyn/parallel.hpp"
#include "gpdyn/random.hpp"

namespace gpdyn {

std::string to_string(ProxyVariant v)
{
    switch (v) {
    case ProxyVariant::ConstantOffset: return "1a";
    case ProxyVariant::AdditiveNoise: return "1b";
    case ProxyVariant::UncertainGain: return "2a";
    case ProxyVariant::MultiplicativeNoise: return "2b";
    }
    return "?";
}

ProxyVariant parse_proxy_variant(const std::string & name)
{
    if (name == "1a")
        return ProxyVariant::ConstantOffset;
    if (name == "1b")
        return ProxyVariant::AdditiveNoise;
    if (name == "2a")
        return ProxyVariant::UncertainGain;
    if (name == "2b")
        return ProxyVariant::MultiplicativeNoise;
    throw Error("unknown proxy variant '" + name + "' (expected 1a, 1b, 2a or 2b)");
}

std::vector<double> shifted_gaussian_raw_moments(double a, double sigma, int max_power)
{
    std::vector<double> m(static_cast<std::size_t>(std::max(max_power, 1)) + 1);
    m[0] = 1.0;
    m[1] = a;
    const double s2 = sigma * sigma;
    for (int p = 2; p <= max_power; ++p)
        m[p] = a * m[p - 1] + (p - 1) * s2 * m[p - 2];
    return m;
}

std::vector<StepMoments> proxy_moments_closed_form(const ProxySpec & spec)
{
    const Index N = spec.steps;
    const double a = spec.gain, sf2 = spec.sigma_f * spec.sigma_f, sw2 = spec.sigma_w * spec.sigma_w;
    std::vector<StepMoments> out(static_cast<std::size_t>(N) + 1);

    switch (spec.variant) {
    case ProxyVariant::ConstantOffset:
    case ProxyVariant::AdditiveNoise: {
        double geometric = 0.0;      // sum_{j<k} a^j
        double geometric_sq = 0.0;   // sum_{j<k} a^{2j}
        for (Index k = 0; k <= N; ++k) {
            auto & s = out[static_cast<std::size_t>(k)];
            s.mean = std::pow(a, static_cast<double>(k)) * spec.x0;
            s.variance = spec.variant == ProxyVariant::ConstantOffset ? sf2 * geometric * geometric + sw2 * geometric_sq
                                                                      : (sf2 + sw2) * geometric_sq;
            geometric += std::pow(a, static_cast<double>(k));
            geometric_sq += std::pow(a, 2.0 * static_cast<double>(k));
        }
        break;
    }
    case ProxyVariant::UncertainGain: {
        // x_k = g^k x0 + sum_{j<k} g^{k-1-j} w_j with g = a + theta.
        const auto m = shifted_gaussian_raw_moments(a, spec.sigma_f, static_cast<int>(2 * N));
        double noise_sum = 0.0;   // sum_{j<k} E[g^{2j}]
        for (Index k = 0; k <= N; ++k) {
            auto & s = out[static_cast<std::size_t>(k)];
            s.mean = m[static_cast<std::size_t>(k)] * spec.x0;
            const double second = m[static_cast<std::size_t>(2 * k)] * spec.x0 * spec.x0 + sw2 * noise_sum;
            s.variance = second - s.mean * s.mean;
            noise_sum += m[static_cast<std::size_t>(2 * k)];
        }
        break;
    }
    case ProxyVariant::MultiplicativeNoise: {
        for (Index k = 0; k <= N; ++k) {
            auto & s = out[static_cast<std::size_t>(k)];
            const double kd = static_cast<double>(k);
            s.mean = std::pow(a, kd) * spec.x0;
            s.variance = (std::pow(a * a + sf2, kd) - std::pow(a * a, kd)) * spec.x0 * spec.x0;
        }
        break;
    }
    }
    return out;
}

TrajectoryBatch proxy_simulate(const ProxySpec & spec, std::size_t samples, std::uint64_t seed, unsigned threads)
{
    if (spec.steps < 1)
        throw Error("proxy_simulate: horizon must have at least one step");
    TrajectoryBatch batch;
    batch.state_dim = 1;
    batch.horizon = spec.steps;
    batch.seed = seed;
    batch.method = MethodTag::ProxyReference;
    batch.states.resize(samples);

    const bool persistent = spec.variant == ProxyVariant::ConstantOffset || spec.variant == ProxyVariant::UncertainGain;
    parallel_for(samples, [&](std::size_t i) {
        NormalStream stream(seed, StreamTag::ProxyParameters, i);
        Eigen::MatrixXd & x = batch.states[i];
        x.resize(1, spec.steps + 1);
        x(0, 0) = spec.x0;
        const double theta = persistent ? spec.sigma_f * stream.next() : 0.0;
        for (Index k = 0; k < spec.steps; ++k) {
            const double th = persistent ? theta : spec.sigma_f * stream.next();
            const double w = spec.sigma_w * stream.next();
            const double prev = x(0, k);
            double next = 0.0;
            switch (spec.variant) {
            case ProxyVariant::ConstantOffset:
            case ProxyVariant::AdditiveNoise: next = spec.gain * prev + th + w; break;
            case ProxyVariant::UncertainGain: next = (spec.gain + th) * prev + w; break;
            case ProxyVariant::MultiplicativeNoise: next = (spec.gain + th) * prev; break;
            }
            if (!std::isfinite(next) || std::abs(next) > divergence_bound)
                throw NonFinite("proxy trajectory " + std::to_string(i) + " diverged", static_cast<std::size_t>(k + 1));
            x(0, k + 1) = next;
        }
    }, threads);
    return batch;
}

} // namespace gpdyn
