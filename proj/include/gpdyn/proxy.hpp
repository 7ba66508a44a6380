/**
 * @file proxy.hpp
 * @brief Scalar parametric systems whose trajectory laws are limit cases of
 * GP dynamics with mean 0.95 x:
 *
 *   constant offset       x+ = a x + theta   + w    (SE, long lengthscale)
 *   additive noise        x+ = a x + theta_k + w    (SE, short lengthscale)
 *   uncertain gain        x+ = (a + theta) x + w    (linear kernel)
 *   multiplicative noise  x+ = (a + theta_k) x      (linear x SE, short lengthscale)
 *
 * theta ~ N(0, sigma_f^2) is drawn once per trajectory, theta_k afresh at
 * every step, w ~ N(0, sigma_w^2). The multiplicative variant has no additive
 * noise; its sigma_w is ignored.
 */

#ifndef GPDYN_PROXY_HPP
#define GPDYN_PROXY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gpdyn/trajectory.hpp"

namespace gpdyn {

enum class ProxyVariant
{
    ConstantOffset,        // 1a
    AdditiveNoise,         // 1b
    UncertainGain,         // 2a
    MultiplicativeNoise,   // 2b
};

/// "1a", "1b", "2a", "2b".
std::string to_string(ProxyVariant v);
ProxyVariant parse_proxy_variant(const std::string & name);

struct ProxySpec
{
    ProxyVariant variant = ProxyVariant::ConstantOffset;
    double gain = 0.95;
    double sigma_f = 1.0;
    double sigma_w = 1.0;
    double x0 = 1.0;
    Index steps = 50;
};

struct StepMoments
{
    double mean = 0.0;
    double variance = 0.0;
};

/// Exact per-step mean and variance for steps 0..N.
std::vector<StepMoments> proxy_moments_closed_form(const ProxySpec & spec);

/// Raw moments E[(a + theta)^p], p = 0..max_power, theta ~ N(0, sigma^2).
std::vector<double> shifted_gaussian_raw_moments(double a, double sigma, int max_power);

/// Direct Monte Carlo of the parametric recursion.
TrajectoryBatch proxy_simulate(const ProxySpec & spec, std::size_t samples, std::uint64_t seed, unsigned threads = 0);

} // namespace gpdyn

#endif
