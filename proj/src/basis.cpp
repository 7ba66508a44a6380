#include "gpdyn/basis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

#include <Eigen/Eigenvalues>

#include "gpdyn/csv.hpp"
#include "gpdyn/error.hpp"
#include "gpdyn/parallel.hpp"
#include "gpdyn/random.hpp"

namespace gpdyn {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using K = ScalarKernel<double>;

FeatureMap::FeatureMap(Kind k)
    : kind_(std::move(k))
{
    if (const auto * f = std::get_if<Fourier>(&kind_)) {
        if (f->frequencies.rows() != f->phases.size())
            throw DimensionMismatch("Fourier features: one phase per frequency required");
    } else if (const auto * n = std::get_if<Nystrom>(&kind_)) {
        if (n->projection.rows() != n->landmarks.cols() || n->projection.cols() != n->eigenvalues.size())
            throw DimensionMismatch("Nystrom features: projection shape does not match landmarks and eigenvalues");
    } else if (const auto * l = std::get_if<LinearTimes>(&kind_)) {
        if (!l->inner)
            throw Error("linear-times features need an inner map");
    }
}

Index FeatureMap::size() const
{
    return std::visit(
        [](const auto & k) -> Index {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Fourier>)
                return k.phases.size();
            else if constexpr (std::is_same_v<T, Nystrom>)
                return k.eigenvalues.size();
            else if constexpr (std::is_same_v<T, LinearExact>)
                return k.dim;
            else
                return k.inner->input_dim() * k.inner->size();
        },
        kind_);
}

Index FeatureMap::input_dim() const
{
    return std::visit(
        [](const auto & k) -> Index {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Fourier>)
                return k.frequencies.cols();
            else if constexpr (std::is_same_v<T, Nystrom>)
                return k.landmarks.rows();
            else if constexpr (std::is_same_v<T, LinearExact>)
                return k.dim;
            else
                return k.inner->input_dim();
        },
        kind_);
}

VectorXd FeatureMap::operator()(const VectorXd & z) const
{
    if (z.size() != input_dim())
        throw DimensionMismatch("feature map: input length mismatch");
    return std::visit(
        [&](const auto & k) -> VectorXd {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Fourier>) {
                const double scale = k.sigma_f * std::sqrt(2.0 / static_cast<double>(k.phases.size()));
                return scale * (k.frequencies * z + k.phases).array().cos().matrix();
            } else if constexpr (std::is_same_v<T, Nystrom>) {
                VectorXd kx(k.landmarks.cols());
                for (Index j = 0; j < kx.size(); ++j)
                    kx(j) = k.kernel(z, k.landmarks.col(j));
                return k.projection.transpose() * kx;
            } else if constexpr (std::is_same_v<T, LinearExact>) {
                return k.sigma_f * z;
            } else {
                const VectorXd inner = (*k.inner)(z);
                const Index m = inner.size();
                VectorXd out(z.size() * m);
                for (Index a = 0; a < z.size(); ++a)
                    out.segment(a * m, m) = (k.scale * z(a)) * inner;
                return out;
            }
        },
        kind_);
}

Index BasisExpansion::out_dim() const { return shared ? output_tags.size() : static_cast<Index>(maps.size()); }

Index BasisExpansion::size() const
{
    if (shared)
        return maps.front().size();
    Index total = 0;
    for (const auto & m : maps)
        total += m.size();
    return total;
}

MatrixXd BasisExpansion::design(const VectorXd & z) const
{
    if (z.size() != input_dim)
        throw DimensionMismatch("basis expansion: input length mismatch");
    const Index n = out_dim();
    MatrixXd phi = MatrixXd::Zero(n, size());
    if (shared) {
        VectorXd za(input_dim + 1);
        za.head(input_dim) = z;
        for (Index a = 0; a < n; ++a) {
            za(input_dim) = output_tags(a);
            phi.row(a) = maps.front()(za).transpose();
        }
        return phi;
    }
    Index offset = 0;
    for (Index a = 0; a < n; ++a) {
        const auto & map = maps[static_cast<std::size_t>(a)];
        phi.block(a, offset, 1, map.size()) = map(z).transpose();
        offset += map.size();
    }
    return phi;
}

BasisExpansion make_expansion(Index input_dim, std::vector<FeatureMap> maps, bool shared, VectorXd output_tags)
{
    if (maps.empty())
        throw DimensionMismatch("basis expansion needs at least one feature map");
    if (shared && (maps.size() != 1 || output_tags.size() == 0))
        throw DimensionMismatch("shared basis expansion needs one map and at least one output tag");
    const Index map_dim = shared ? input_dim + 1 : input_dim;
    for (const auto & m : maps)
        if (m.input_dim() != map_dim)
            throw DimensionMismatch("feature map input dimension does not match the expansion");
    BasisExpansion e;
    e.input_dim = input_dim;
    e.maps = std::move(maps);
    e.shared = shared;
    e.output_tags = std::move(output_tags);
    e.weights = GaussianDist<double>::standard(e.size());
    return e;
}

FeatureMap rff_features(const K & k, Index input_dim, Index m, std::uint64_t seed, std::uint64_t index)
{
    const auto * se = std::get_if<K::SquaredExponential>(&k.variant());
    if (!se)
        throw UnsupportedMethod("random Fourier features require a squared exponential kernel");
    if (m < 1)
        throw Error("random Fourier features: m must be at least 1");
    NormalStream stream(seed, StreamTag::BasisFeatures, index);
    FeatureMap::Fourier f{se->sigma_f, MatrixXd(m, input_dim), VectorXd(m)};
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < input_dim; ++j)
            f.frequencies(i, j) = stream.next() / se->lengthscale;
    for (Index i = 0; i < m; ++i)
        f.phases(i) = stream.uniform(0.0, 2.0 * std::numbers::pi);
    return FeatureMap(std::move(f));
}

BasisExpansion rff_expansion(const K & k, Index input_dim, Index m, std::uint64_t seed, std::uint64_t index)
{
    return make_expansion(input_dim, {rff_features(k, input_dim, m, seed, index)});
}

FeatureMap nystrom_features(const K & k, const MatrixXd & sample_points, Index m)
{
    const Index p = sample_points.cols();
    if (m < 1 || m > p)
        throw DimensionMismatch("Nystrom: need 1 <= m <= number of sample points");
    const MatrixXd gram = kernel_gram(MatrixKernel<double>::scalar(k), sample_points);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
        throw NotPositiveDefinite("Nystrom: eigendecomposition failed");

    // Ascending from Eigen; walk from the top.
    const VectorXd & kappa = eig.eigenvalues();
    const double top = kappa(p - 1);
    Index usable = 0;
    for (Index i = p - 1; i >= 0 && kappa(i) > 1e-12 * top && top > 0; --i)
        ++usable;
    if (usable < m)
        throw DegenerateSpectrum("Nystrom: only " + std::to_string(usable) + " eigenvalues above 1e-12 of the largest",
                                 static_cast<std::size_t>(usable));

    FeatureMap::Nystrom n{k, sample_points, VectorXd(m), MatrixXd(p, m)};
    for (Index i = 0; i < m; ++i) {
        const Index src = p - 1 - i;
        VectorXd v = eig.eigenvectors().col(src);
        const double vmax = v.cwiseAbs().maxCoeff();
        for (Index j = 0; j < p; ++j)
            if (std::abs(v(j)) > 1e-12 * vmax) {
                if (v(j) < 0)
                    v = -v;
                break;
            }
        n.eigenvalues(i) = kappa(src) / static_cast<double>(p);
        n.projection.col(i) = v / std::sqrt(kappa(src));
    }
    return FeatureMap(std::move(n));
}

BasisExpansion nystrom_expansion(const K & k, const MatrixXd & sample_points, Index m)
{
    return make_expansion(sample_points.rows(), {nystrom_features(k, sample_points, m)});
}

MatrixXd uniform_points(Index input_dim, Index p, double lo, double hi, std::uint64_t seed, std::uint64_t index)
{
    NormalStream stream(seed, StreamTag::BasisFeatures, index);
    MatrixXd pts(input_dim, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < input_dim; ++i)
            pts(i, j) = stream.uniform(lo, hi);
    return pts;
}

BasisExpansion linear_exact_expansion(const K & k, Index input_dim)
{
    const auto * lin = std::get_if<K::Linear>(&k.variant());
    if (!lin)
        throw UnsupportedMethod("exact linear features require a linear kernel");
    return make_expansion(input_dim, {FeatureMap(FeatureMap::LinearExact{lin->sigma_f, input_dim})});
}

BasisExpansion linear_times_base(const BasisExpansion & inner, double scale)
{
    if (inner.shared)
        throw UnsupportedMethod("linear-times features are defined for per-output maps only");
    std::vector<FeatureMap> maps;
    for (const auto & m : inner.maps)
        maps.emplace_back(FeatureMap::LinearTimes{std::make_shared<const FeatureMap>(m), scale});
    return make_expansion(inner.input_dim, std::move(maps));
}

namespace {

FeatureMap fourier_features_for(const K & k, Index dim, Index m, std::uint64_t seed, std::uint64_t index)
{
    if (const auto * lin = std::get_if<K::Linear>(&k.variant()))
        return FeatureMap(FeatureMap::LinearExact{lin->sigma_f, dim});
    if (std::holds_alternative<K::SquaredExponential>(k.variant()))
        return rff_features(k, dim, m, seed, index);
    const auto & prod = std::get<K::Product>(k.variant());
    const K * other = nullptr;
    const K::Linear * lin = nullptr;
    if ((lin = std::get_if<K::Linear>(&prod.left->variant())))
        other = prod.right.get();
    else if ((lin = std::get_if<K::Linear>(&prod.right->variant())))
        other = prod.left.get();
    if (!lin)
        throw UnsupportedMethod("Fourier construction supports SE, linear and linear x base kernels");
    auto inner = std::make_shared<const FeatureMap>(fourier_features_for(*other, dim, m, seed, index));
    return FeatureMap(FeatureMap::LinearTimes{std::move(inner), lin->sigma_f});
}

FeatureMap features_for(const K & k, Index dim, const BasisOptions & opts, std::uint64_t seed, std::uint64_t index,
                        const VectorXd & tags)
{
    if (opts.construction == BasisConstruction::Fourier)
        return fourier_features_for(k, dim, opts.m, seed, index);
    const Index x_dim = tags.size() > 0 ? dim - 1 : dim;
    MatrixXd pts = uniform_points(x_dim, opts.nystrom_points, opts.nystrom_lo, opts.nystrom_hi, seed, index);
    if (tags.size() > 0) {
        MatrixXd aug(dim, pts.cols() * tags.size());
        for (Index a = 0; a < tags.size(); ++a)
            for (Index j = 0; j < pts.cols(); ++j) {
                aug.col(a * pts.cols() + j).head(x_dim) = pts.col(j);
                aug(x_dim, a * pts.cols() + j) = tags(a);
            }
        pts = std::move(aug);
    }
    return nystrom_features(k, pts, opts.m);
}

} // namespace

BasisExpansion expansion_for(const MatrixKernel<double> & k, Index input_dim, const BasisOptions & opts,
                             std::uint64_t seed, std::uint64_t index)
{
    using MK = MatrixKernel<double>;
    if (const auto * ind = std::get_if<MK::IndependentOutputs>(&k.construction())) {
        std::vector<FeatureMap> maps;
        const auto n = ind->per_dim.size();
        for (std::size_t a = 0; a < n; ++a)
            maps.push_back(features_for(ind->per_dim[a], input_dim, opts, seed, index * n + a, {}));
        return make_expansion(input_dim, std::move(maps));
    }
    const auto & dc = std::get<MK::DistanceCoupled>(k.construction());
    return make_expansion(input_dim, {features_for(dc.base, input_dim + 1, opts, seed, index, dc.metric)}, true,
                          dc.metric);
}

BasisExpansion condition_weights(const BasisExpansion & e, const MatrixXd & X, const MatrixXd & Y, const MatrixXd & Q)
{
    const Index n = e.out_dim();
    if (X.cols() != Y.cols() || X.rows() != e.input_dim || Y.rows() != n)
        throw DimensionMismatch("condition_weights: training data shapes do not match the expansion");
    if (Q.rows() != n || Q.cols() != n)
        throw DimensionMismatch("condition_weights: noise covariance must be out_dim x out_dim");
    if (X.cols() == 0)
        return e;

    // Joint Gaussian of [theta; Phi theta], conditioned on the noisy targets.
    const Index M = e.size();
    const Index P = X.cols() * n;
    MatrixXd Phi(P, M);
    for (Index j = 0; j < X.cols(); ++j)
        Phi.middleRows(j * n, n) = e.design(X.col(j));
    const MatrixXd cross = e.weights.cov * Phi.transpose();
    MatrixXd cov(M + P, M + P);
    cov.topLeftCorner(M, M) = e.weights.cov;
    cov.topRightCorner(M, P) = cross;
    cov.bottomLeftCorner(P, M) = cross.transpose();
    cov.bottomRightCorner(P, P) = Phi * cross;
    cov.bottomRightCorner(P, P) = 0.5 * (cov.bottomRightCorner(P, P) + cov.bottomRightCorner(P, P).transpose()).eval();
    VectorXd mean(M + P);
    mean << e.weights.mean, Phi * e.weights.mean;

    MatrixXd noise = MatrixXd::Zero(P, P);
    for (Index j = 0; j < X.cols(); ++j)
        noise.block(j * n, j * n, n, n) = Q;
    std::vector<Index> observed(static_cast<std::size_t>(P));
    for (Index i = 0; i < P; ++i)
        observed[static_cast<std::size_t>(i)] = M + i;
    const VectorXd y = Y.reshaped();

    BasisExpansion out = e;
    out.weights = gaussian_condition(GaussianDist<double>(std::move(mean), std::move(cov)), observed, y, noise);
    return out;
}

std::vector<FunctionSample> draw_function_samples(const BasisExpansion & e, std::size_t count, std::uint64_t seed)
{
    auto shared = std::make_shared<const BasisExpansion>(e);
    const auto factor = cholesky(e.weights.cov);
    std::vector<FunctionSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        NormalStream stream(seed, StreamTag::BasisWeights, i);
        out.push_back(FunctionSample{shared, mvn_sample(e.weights, factor, stream.next(e.size()))});
    }
    return out;
}

std::vector<FunctionSample> draw_function_samples(const std::function<BasisExpansion(std::size_t)> & make,
                                                  std::size_t count, std::uint64_t seed, unsigned threads)
{
    std::vector<FunctionSample> out(count);
    parallel_for(
        count,
        [&](std::size_t i) {
            auto e = std::make_shared<const BasisExpansion>(make(i));
            const auto factor = cholesky(e->weights.cov);
            NormalStream stream(seed, StreamTag::BasisWeights, i);
            out[i] = FunctionSample{e, mvn_sample(e->weights, factor, stream.next(e->size()))};
        },
        threads);
    return out;
}

TrajectoryBatch simulate_with_function_samples(const MeanFn<double> & mean, const std::vector<FunctionSample> & samples,
                                               const Horizon<double> & h, const MatrixXd & Q, std::uint64_t seed,
                                               const AfsOptions & opts, const MatrixXd & inputs)
{
    if (samples.empty())
        throw Error("simulate_with_function_samples: no function samples");
    const Index n = mean.out_dim();
    const Index m = inputs.rows();
    if (h.x0.size() != n || Q.rows() != n || Q.cols() != n)
        throw DimensionMismatch("simulate_with_function_samples: state dimension mismatch");
    if (mean.in_dim() != n + m)
        throw DimensionMismatch("simulate_with_function_samples: mean input dimension must equal state + inputs");
    if (m > 0 && inputs.cols() < h.steps)
        throw DimensionMismatch("simulate_with_function_samples: control sequence shorter than the horizon");
    for (const auto & s : samples)
        if (s.expansion->input_dim != n + m || s.expansion->out_dim() != n || s.theta.size() != s.expansion->size())
            throw DimensionMismatch("simulate_with_function_samples: function sample does not match the model");

    // Exactly zero noise consumes no draws.
    const bool noisy = !Q.isZero(0.0);
    MatrixXd LQ;
    if (noisy)
        LQ = cholesky(Q).lower();

    TrajectoryBatch batch;
    batch.state_dim = n;
    batch.horizon = h.steps;
    batch.seed = seed;
    batch.method = MethodTag::ApproxFunctionSample;
    batch.inputs = inputs.leftCols(m > 0 ? h.steps : 0);
    batch.states.resize(samples.size());

    parallel_for(
        samples.size(),
        [&](std::size_t i) {
            NormalStream stream(seed, StreamTag::FunctionSampleNoise, i);
            MatrixXd states(n, h.steps + 1);
            states.col(0) = h.x0;
            VectorXd z(n + m);
            for (Index k = 0; k < h.steps; ++k) {
                z.head(n) = states.col(k);
                if (m > 0)
                    z.tail(m) = inputs.col(k);
                VectorXd next = samples[i](z);
                if (opts.mode == ExpansionMode::Residual)
                    next += mean(z);
                if (noisy)
                    next += LQ * stream.next(n);
                for (Index a = 0; a < n; ++a)
                    if (!std::isfinite(next(a)) || std::abs(next(a)) > divergence_bound)
                        throw NonFinite("function-sample trajectory " + std::to_string(i) + " diverged",
                                        static_cast<std::size_t>(k + 1));
                states.col(k + 1) = next;
            }
            batch.states[i] = std::move(states);
        },
        opts.threads);
    return batch;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using csv::format_number;

void write_row(std::ostream & out, const std::string & tag, const VectorXd & v)
{
    out << tag;
    for (Index i = 0; i < v.size(); ++i)
        out << ',' << format_number(v(i));
    out << '\n';
}

void write_kernel(std::ostream & out, const K & k)
{
    std::visit(
        [&](const auto & v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, K::SquaredExponential>)
                out << "kernel,se," << format_number(v.sigma_f) << ',' << format_number(v.lengthscale) << '\n';
            else if constexpr (std::is_same_v<T, K::Linear>)
                out << "kernel,linear," << format_number(v.sigma_f) << '\n';
            else {
                out << "kernel,product\n";
                write_kernel(out, *v.left);
                write_kernel(out, *v.right);
            }
        },
        k.variant());
}

void write_map(std::ostream & out, const FeatureMap & map)
{
    std::visit(
        [&](const auto & v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, FeatureMap::Fourier>) {
                out << "map,fourier," << format_number(v.sigma_f) << ',' << v.frequencies.rows() << ','
                    << v.frequencies.cols() << '\n';
                for (Index i = 0; i < v.frequencies.rows(); ++i)
                    write_row(out, "freq", v.frequencies.row(i).transpose());
                write_row(out, "phase", v.phases);
            } else if constexpr (std::is_same_v<T, FeatureMap::Nystrom>) {
                out << "map,nystrom," << v.landmarks.cols() << ',' << v.eigenvalues.size() << ',' << v.landmarks.rows()
                    << '\n';
                write_kernel(out, v.kernel);
                for (Index j = 0; j < v.landmarks.cols(); ++j)
                    write_row(out, "landmark", v.landmarks.col(j));
                write_row(out, "eig", v.eigenvalues);
                for (Index j = 0; j < v.projection.rows(); ++j)
                    write_row(out, "proj", v.projection.row(j).transpose());
            } else if constexpr (std::is_same_v<T, FeatureMap::LinearExact>) {
                out << "map,linear," << format_number(v.sigma_f) << ',' << v.dim << '\n';
            } else {
                out << "map,linear_times," << format_number(v.scale) << '\n';
                write_map(out, *v.inner);
            }
        },
        map.kind());
}

class RecordReader
{
public:
    explicit RecordReader(std::istream & in)
        : in_(in)
    {}

    std::vector<std::string> next(const std::string & expected_tag)
    {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty() || line.front() == '#')
                continue;
            std::vector<std::string> fields;
            for (auto f : csv::split(line))
                fields.emplace_back(f);
            if (!expected_tag.empty() && fields.front() != expected_tag)
                fail("expected '" + expected_tag + "' record, got '" + fields.front() + "'");
            return fields;
        }
        if (!expected_tag.empty())
            fail("unexpected end of input, expected '" + expected_tag + "'");
        return {};
    }

    VectorXd numbers(const std::vector<std::string> & fields, std::size_t from = 1) const
    {
        VectorXd v(static_cast<Index>(fields.size() - from));
        for (std::size_t i = from; i < fields.size(); ++i)
            v(static_cast<Index>(i - from)) = number(fields[i]);
        return v;
    }

    double number(const std::string & s) const
    {
        try {
            return csv::parse_number(s);
        } catch (const Error &) {
            fail("bad number '" + s + "'");
        }
    }

    Index count(const std::string & s) const { return static_cast<Index>(number(s)); }

    [[noreturn]] void fail(const std::string & what) const
    {
        throw Error("expansion file line " + std::to_string(line_no_) + ": " + what);
    }

    void expect_fields(const std::vector<std::string> & f, std::size_t n) const
    {
        if (f.size() != n)
            fail("record '" + f.front() + "' needs " + std::to_string(n - 1) + " values");
    }

private:
    std::istream & in_;
    std::size_t line_no_ = 0;
};

K read_kernel(RecordReader & r)
{
    const auto f = r.next("kernel");
    if (f.size() < 2)
        r.fail("kernel record without a type");
    if (f[1] == "se") {
        r.expect_fields(f, 4);
        return K::squared_exponential(r.number(f[2]), r.number(f[3]));
    }
    if (f[1] == "linear") {
        r.expect_fields(f, 3);
        return K::linear(r.number(f[2]));
    }
    if (f[1] == "product") {
        auto left = read_kernel(r);
        auto right = read_kernel(r);
        return K::product(std::move(left), std::move(right));
    }
    r.fail("unknown kernel type '" + f[1] + "'");
}

FeatureMap read_map(RecordReader & r)
{
    const auto f = r.next("map");
    if (f.size() < 2)
        r.fail("map record without a type");
    if (f[1] == "fourier") {
        r.expect_fields(f, 5);
        const Index m = r.count(f[3]), d = r.count(f[4]);
        FeatureMap::Fourier v{r.number(f[2]), MatrixXd(m, d), VectorXd()};
        for (Index i = 0; i < m; ++i) {
            const VectorXd row = r.numbers(r.next("freq"));
            if (row.size() != d)
                r.fail("frequency row length mismatch");
            v.frequencies.row(i) = row.transpose();
        }
        v.phases = r.numbers(r.next("phase"));
        if (v.phases.size() != m)
            r.fail("phase count mismatch");
        return FeatureMap(std::move(v));
    }
    if (f[1] == "nystrom") {
        r.expect_fields(f, 5);
        const Index p = r.count(f[2]), m = r.count(f[3]), d = r.count(f[4]);
        FeatureMap::Nystrom v{read_kernel(r), MatrixXd(d, p), VectorXd(), MatrixXd(p, m)};
        for (Index j = 0; j < p; ++j) {
            const VectorXd col = r.numbers(r.next("landmark"));
            if (col.size() != d)
                r.fail("landmark length mismatch");
            v.landmarks.col(j) = col;
        }
        v.eigenvalues = r.numbers(r.next("eig"));
        if (v.eigenvalues.size() != m)
            r.fail("eigenvalue count mismatch");
        for (Index j = 0; j < p; ++j) {
            const VectorXd row = r.numbers(r.next("proj"));
            if (row.size() != m)
                r.fail("projection row length mismatch");
            v.projection.row(j) = row.transpose();
        }
        return FeatureMap(std::move(v));
    }
    if (f[1] == "linear") {
        r.expect_fields(f, 4);
        return FeatureMap(FeatureMap::LinearExact{r.number(f[2]), r.count(f[3])});
    }
    if (f[1] == "linear_times") {
        r.expect_fields(f, 3);
        const double scale = r.number(f[2]);
        return FeatureMap(FeatureMap::LinearTimes{std::make_shared<const FeatureMap>(read_map(r)), scale});
    }
    r.fail("unknown map type '" + f[1] + "'");
}

} // namespace

void write_expansion(std::ostream & out, const BasisExpansion & e, const std::vector<VectorXd> & thetas)
{
    out << "expansion," << e.input_dim << ',' << (e.shared ? 1 : 0) << ',' << e.maps.size() << '\n';
    if (e.shared)
        write_row(out, "tags", e.output_tags);
    for (const auto & m : e.maps)
        write_map(out, m);
    write_row(out, "weights_mean", e.weights.mean);
    for (Index i = 0; i < e.weights.cov.rows(); ++i)
        write_row(out, "weights_cov", e.weights.cov.row(i).transpose());
    for (const auto & t : thetas)
        write_row(out, "theta", t);
}

StoredExpansion read_expansion(std::istream & in)
{
    RecordReader r(in);
    const auto head = r.next("expansion");
    r.expect_fields(head, 4);
    const Index input_dim = r.count(head[1]);
    const bool shared = r.count(head[2]) != 0;
    const Index maps = r.count(head[3]);
    VectorXd tags;
    if (shared)
        tags = r.numbers(r.next("tags"));
    std::vector<FeatureMap> list;
    for (Index i = 0; i < maps; ++i)
        list.push_back(read_map(r));
    StoredExpansion s{make_expansion(input_dim, std::move(list), shared, std::move(tags)), {}};
    const Index M = s.expansion.size();
    VectorXd mean = r.numbers(r.next("weights_mean"));
    if (mean.size() != M)
        r.fail("weight mean length mismatch");
    MatrixXd cov(M, M);
    for (Index i = 0; i < M; ++i) {
        const VectorXd row = r.numbers(r.next("weights_cov"));
        if (row.size() != M)
            r.fail("weight covariance row length mismatch");
        cov.row(i) = row.transpose();
    }
    s.expansion.weights = GaussianDist<double>(std::move(mean), std::move(cov));
    for (auto f = r.next(""); !f.empty(); f = r.next("")) {
        if (f.front() != "theta")
            r.fail("unexpected record '" + f.front() + "'");
        s.thetas.push_back(r.numbers(f));
        if (s.thetas.back().size() != M)
            r.fail("theta length mismatch");
    }
    return s;
}

} // namespace gpdyn
