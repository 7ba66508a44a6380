#ifndef GPDYN_RANDOM_HPP
#define GPDYN_RANDOM_HPP

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace gpdyn {

/// Purpose tags so that different consumers of one seed never share a stream.
enum class StreamTag : std::uint64_t
{
    TrajectoryNoise = 1,
    FunctionSampleNoise = 2,
    BasisFeatures = 3,
    BasisWeights = 4,
    ProxyParameters = 5,
    ProxyNoise = 6,
    Diagnostics = 7,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Seed of the substream keyed by (seed, tag, index).
inline std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t index)
{
    std::uint64_t h = detail::splitmix64(seed);
    h = detail::splitmix64(h ^ static_cast<std::uint64_t>(tag));
    return detail::splitmix64(h ^ detail::splitmix64(index));
}

/**
 * @brief Standard-normal substream for one trajectory.
 *
 * Draws are consumed in step order, n per step, so the draw for step k is a
 * function of (seed, tag, index, k) alone regardless of the horizon.
 */
class NormalStream
{
public:
    NormalStream(std::uint64_t seed, StreamTag tag, std::uint64_t index)
        : engine_(derive_seed(seed, tag, index))
    {}

    double next() { return normal_(engine_); }

    Eigen::VectorXd next(Eigen::Index n)
    {
        Eigen::VectorXd out(n);
        for (Eigen::Index i = 0; i < n; ++i)
            out(i) = normal_(engine_);
        return out;
    }

    /// n x steps block, column k holds the draw of step k.
    Eigen::MatrixXd steps(Eigen::Index n, Eigen::Index steps)
    {
        Eigen::MatrixXd out(n, steps);
        for (Eigen::Index k = 0; k < steps; ++k)
            for (Eigen::Index i = 0; i < n; ++i)
                out(i, k) = normal_(engine_);
        return out;
    }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

    std::mt19937_64 & engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

/// Standard-normal noise tensor W~: one n x steps block per trajectory.
struct NoiseDraws
{
    std::vector<Eigen::MatrixXd> per_trajectory;
};

inline NoiseDraws draw_noise(std::uint64_t seed, StreamTag tag, std::size_t samples, Eigen::Index steps, Eigen::Index n)
{
    NoiseDraws out;
    out.per_trajectory.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i)
        out.per_trajectory.push_back(NormalStream(seed, tag, i).steps(n, steps));
    return out;
}

} // namespace gpdyn

#endif
