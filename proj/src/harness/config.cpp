#include "gpdyn/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "gpdyn/csv.hpp"
#include "gpdyn/error.hpp"

namespace gpdyn::harness {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::string join(const std::vector<std::string> & parts)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i)
        out += (i ? ", " : "") + parts[i];
    return out;
}

struct Value
{
    std::string key;
    std::string text;
    std::size_t line;

    [[noreturn]] void fail(const std::string & what) const { throw ConfigInvalid(key, what, line); }

    double real() const
    {
        try {
            const double v = csv::parse_number(text);
            if (!std::isfinite(v))
                fail("value must be finite");
            return v;
        } catch (const ConfigInvalid &) {
            throw;
        } catch (const Error &) {
            fail("expected a decimal number, got '" + text + "'");
        }
    }

    double real_at_least(double lo, bool strict) const
    {
        const double v = real();
        if (strict ? !(v > lo) : !(v >= lo))
            fail(std::string("must be ") + (strict ? "> " : ">= ") + csv::format_number(lo) + ", got " + text);
        return v;
    }

    std::uint64_t count(std::uint64_t lo) const
    {
        std::uint64_t v = 0;
        const auto t = trim(text);
        const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty())
            fail("expected a nonnegative integer, got '" + text + "'");
        if (v < lo)
            fail("must be >= " + std::to_string(lo) + ", got " + text);
        return v;
    }

    bool boolean() const
    {
        if (text == "true")
            return true;
        if (text == "false")
            return false;
        fail("expected true or false, got '" + text + "'");
    }

    std::string choice(std::initializer_list<std::string_view> options) const
    {
        for (auto o : options)
            if (text == o)
                return text;
        std::string list;
        for (auto o : options)
            list += (list.empty() ? "" : ", ") + std::string(o);
        fail("expected one of {" + list + "}, got '" + text + "'");
    }

    std::vector<std::string> list() const
    {
        std::vector<std::string> out;
        for (auto part : csv::split(text))
            if (!trim(part).empty())
                out.emplace_back(trim(part));
        if (out.empty())
            fail("expected a non-empty comma-separated list");
        return out;
    }

    std::filesystem::path path(const std::filesystem::path & base) const
    {
        std::filesystem::path p(text);
        if (p.is_relative() && !base.empty())
            p = base / p;
        return p;
    }
};

using Setter = std::function<void(ExperimentConfig &, const Value &, const std::filesystem::path &)>;

struct KeyDef
{
    std::string name;
    bool from_paper;
    Setter set;
    std::function<std::string(const ExperimentConfig &)> show;
};

std::string show_real(double v) { return csv::format_number(v); }

std::string show_list(const std::vector<double> & v)
{
    std::vector<std::string> parts;
    for (double x : v)
        parts.push_back(csv::format_number(x));
    return join(parts);
}

std::string show_methods(const std::vector<MethodSpec> & v)
{
    std::vector<std::string> parts;
    for (const auto & m : v)
        parts.push_back(m.name());
    return join(parts);
}

const std::vector<KeyDef> & keys()
{
    using C = ExperimentConfig;
    using P = std::filesystem::path;
    static const std::vector<KeyDef> defs = {
        {"preset", false, [](C &, const Value &, const P &) {}, [](const C & c) { return c.preset; }},
        {"model.mean", false, [](C & c, const Value & v, const P &) { c.mean = v.choice({"linear", "zero"}); },
         [](const C & c) { return c.mean; }},
        {"model.mean.gain", true, [](C & c, const Value & v, const P &) { c.gain = v.real(); },
         [](const C & c) { return show_real(c.gain); }},
        {"model.mean.input_gain", false, [](C & c, const Value & v, const P &) { c.input_gain = v.real(); },
         [](const C & c) { return show_real(c.input_gain); }},
        {"model.kernel", false,
         [](C & c, const Value & v, const P &) { c.kernel = v.choice({"se", "linear", "linear_se"}); },
         [](const C & c) { return c.kernel; }},
        {"model.kernel.sigma_f", false, [](C & c, const Value & v, const P &) { c.sigma_f = v.real_at_least(0, false); },
         [](const C & c) { return show_real(c.sigma_f); }},
        {"model.kernel.lengthscale", true,
         [](C & c, const Value & v, const P &) { c.lengthscale = v.real_at_least(0, true); },
         [](const C & c) { return show_real(c.lengthscale); }},
        {"model.kernel.outputs", false,
         [](C & c, const Value & v, const P &) { c.outputs = static_cast<Index>(v.count(1)); },
         [](const C & c) { return std::to_string(c.outputs); }},
        {"model.kernel.coupling", false,
         [](C & c, const Value & v, const P &) { c.coupling = v.choice({"independent", "distance"}); },
         [](const C & c) { return c.coupling; }},
        {"model.noise", false, [](C & c, const Value & v, const P &) { c.noise = v.real_at_least(0, false); },
         [](const C & c) { return show_real(c.noise); }},
        {"model.training_data", false, [](C & c, const Value & v, const P & b) { c.training_data = v.path(b); },
         [](const C & c) { return c.training_data.string(); }},
        {"horizon.steps", false, [](C & c, const Value & v, const P &) { c.steps = static_cast<Index>(v.count(1)); },
         [](const C & c) { return std::to_string(c.steps); }},
        {"horizon.x0", false,
         [](C & c, const Value & v, const P &) {
             c.x0.clear();
             for (const auto & s : v.list())
                 c.x0.push_back(Value{v.key, s, v.line}.real());
         },
         [](const C & c) { return show_list(c.x0); }},
        {"inputs.path", false, [](C & c, const Value & v, const P & b) { c.inputs_path = v.path(b); },
         [](const C & c) { return c.inputs_path.string(); }},
        {"methods", false,
         [](C & c, const Value & v, const P &) {
             c.methods.clear();
             for (const auto & s : v.list()) {
                 try {
                     const auto m = MethodSpec::parse(s);
                     if (std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end())
                         v.fail("method '" + s + "' listed twice");
                     c.methods.push_back(m);
                 } catch (const ConfigInvalid &) {
                     throw;
                 } catch (const Error & e) {
                     v.fail(e.what());
                 }
             }
         },
         [](const C & c) { return show_methods(c.methods); }},
        {"samples", true, [](C & c, const Value & v, const P &) { c.samples = v.count(2); },
         [](const C & c) { return std::to_string(c.samples); }},
        {"seed", false, [](C & c, const Value & v, const P &) { c.seed = v.count(0); },
         [](const C & c) { return std::to_string(c.seed); }},
        {"basis.construction", false,
         [](C & c, const Value & v, const P &) {
             c.basis.construction =
                 v.choice({"rff", "nystrom"}) == "rff" ? BasisConstruction::Fourier : BasisConstruction::Nystrom;
         },
         [](const C & c) { return std::string(c.basis.construction == BasisConstruction::Fourier ? "rff" : "nystrom"); }},
        {"basis.m", true, [](C & c, const Value & v, const P &) { c.basis.m = static_cast<Index>(v.count(1)); },
         [](const C & c) { return std::to_string(c.basis.m); }},
        {"basis.mode", false,
         [](C & c, const Value & v, const P &) {
             c.basis_mode = v.choice({"residual", "direct"}) == "residual" ? ExpansionMode::Residual : ExpansionMode::Direct;
         },
         [](const C & c) { return std::string(c.basis_mode == ExpansionMode::Residual ? "residual" : "direct"); }},
        {"basis.resample", false,
         [](C & c, const Value & v, const P &) {
             c.resample = v.choice({"per_sample", "shared"}) == "shared" ? Resampling::Shared : Resampling::PerSample;
         },
         [](const C & c) { return std::string(c.resample == Resampling::Shared ? "shared" : "per_sample"); }},
        {"basis.nystrom.points", false,
         [](C & c, const Value & v, const P &) { c.basis.nystrom_points = static_cast<Index>(v.count(1)); },
         [](const C & c) { return std::to_string(c.basis.nystrom_points); }},
        {"basis.nystrom.box", false,
         [](C & c, const Value & v, const P &) {
             const auto parts = v.list();
             if (parts.size() != 2)
                 v.fail("expected 'lo, hi'");
             c.basis.nystrom_lo = Value{v.key, parts[0], v.line}.real();
             c.basis.nystrom_hi = Value{v.key, parts[1], v.line}.real();
             if (!(c.basis.nystrom_lo < c.basis.nystrom_hi))
                 v.fail("lower bound must be below upper bound");
         },
         [](const C & c) { return show_list({c.basis.nystrom_lo, c.basis.nystrom_hi}); }},
        {"compare.reference", false, [](C & c, const Value & v, const P &) { c.reference = v.text; },
         [](const C & c) { return c.reference; }},
        {"output.dir", false, [](C & c, const Value & v, const P & b) { c.output_dir = v.path(b); },
         [](const C & c) { return c.output_dir.string(); }},
        {"output.full_covariance", false, [](C & c, const Value & v, const P &) { c.full_covariance = v.boolean(); },
         [](const C & c) { return std::string(c.full_covariance ? "true" : "false"); }},
        {"output.trajectories", false, [](C & c, const Value & v, const P &) { c.write_trajectories = v.boolean(); },
         [](const C & c) { return std::string(c.write_trajectories ? "true" : "false"); }},
        {"kernel_check.points", false,
         [](C & c, const Value & v, const P &) { c.kernel_check_points = static_cast<Index>(v.count(1)); },
         [](const C & c) { return std::to_string(c.kernel_check_points); }},
    };
    return defs;
}

const KeyDef * find_key(std::string_view name)
{
    for (const auto & k : keys())
        if (k.name == name)
            return &k;
    return nullptr;
}

std::vector<MethodSpec> default_methods()
{
    return {MethodSpec{MethodKind::GroundTruth}, MethodSpec{MethodKind::Afs}, MethodSpec{MethodKind::Linearized},
            MethodSpec{MethodKind::Independent}};
}

void finish(ExperimentConfig & cfg, const std::set<std::string> & explicit_keys)
{
    if (cfg.methods.empty())
        cfg.methods = default_methods();
    if (cfg.reference.empty())
        cfg.reference = cfg.methods.front().name();
    cfg.defaulted.clear();
    for (const auto & k : keys())
        if (k.name != "preset" && !explicit_keys.count(k.name))
            cfg.defaulted.push_back(k.name);
    validate(cfg);
}

/// Keys each preset sets, so they are not reported as defaults.
std::set<std::string> preset_keys()
{
    return {"model.mean",  "model.mean.gain", "model.kernel", "model.kernel.sigma_f", "model.kernel.lengthscale",
            "model.noise", "horizon.steps",   "horizon.x0",   "methods",              "samples",
            "basis.m",     "compare.reference"};
}

} // namespace

std::string MethodSpec::name() const
{
    switch (kind) {
    case MethodKind::GroundTruth: return "ground_truth";
    case MethodKind::Afs: return "afs";
    case MethodKind::Linearized: return "linearized";
    case MethodKind::Independent: return "independent";
    case MethodKind::Proxy: return "proxy:" + to_string(variant);
    }
    return {};
}

std::string MethodSpec::file_stem() const
{
    auto s = name();
    std::replace(s.begin(), s.end(), ':', '_');
    return s;
}

MethodSpec MethodSpec::parse(std::string_view text)
{
    text = trim(text);
    if (text == "ground_truth")
        return {MethodKind::GroundTruth};
    if (text == "afs")
        return {MethodKind::Afs};
    if (text == "linearized")
        return {MethodKind::Linearized};
    if (text == "independent")
        return {MethodKind::Independent};
    if (text.starts_with("proxy:"))
        return {MethodKind::Proxy, parse_proxy_variant(std::string(text.substr(6)))};
    throw Error("unknown method '" + std::string(text) +
                "' (expected ground_truth, afs, linearized, independent or proxy:<1a|1b|2a|2b>)");
}

std::vector<std::string> preset_names() { return {"fig2-1a", "fig2-1b", "fig2-2a", "fig2-2b"}; }

ExperimentConfig preset(std::string_view name)
{
    ExperimentConfig c;
    c.preset = std::string(name);
    c.mean = "linear";
    c.gain = 0.95;
    c.steps = 50;
    c.x0 = {1.0};
    c.samples = 20000;
    c.basis.m = 10;
    c.reference = "ground_truth";
    auto methods = [](ProxyVariant v) {
        auto m = default_methods();
        m.push_back(MethodSpec{MethodKind::Proxy, v});
        return m;
    };
    if (name == "fig2-1a") {
        c.kernel = "se";
        c.sigma_f = 1.0;
        c.lengthscale = 10.0;
        c.noise = 1.0;
        c.methods = methods(ProxyVariant::ConstantOffset);
    } else if (name == "fig2-1b") {
        c.kernel = "se";
        c.sigma_f = 1.0;
        c.lengthscale = 0.1;
        c.noise = 1.0;
        c.methods = methods(ProxyVariant::AdditiveNoise);
    } else if (name == "fig2-2a") {
        c.kernel = "linear";
        c.sigma_f = 0.05;
        c.noise = 1.0;
        c.methods = methods(ProxyVariant::UncertainGain);
    } else if (name == "fig2-2b") {
        c.kernel = "linear_se";
        c.sigma_f = 0.05;
        c.lengthscale = 0.1;
        c.noise = 0.0;
        c.methods = methods(ProxyVariant::MultiplicativeNoise);
    } else {
        std::string list;
        for (const auto & p : preset_names())
            list += (list.empty() ? "" : ", ") + p;
        throw ConfigInvalid("preset", "unknown preset '" + std::string(name) + "' (expected one of " + list + ")");
    }
    std::set<std::string> set_keys = preset_keys();
    finish(c, set_keys);
    return c;
}

ExperimentConfig parse_config_text(std::string_view text, const std::filesystem::path & base_dir)
{
    std::vector<Value> values;
    std::set<std::string> seen;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigInvalid("", "expected 'key = value'", line_no);
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty())
            throw ConfigInvalid("", "missing key before '='", line_no);
        if (!find_key(key))
            throw ConfigInvalid(key, "unknown key", line_no);
        if (!seen.insert(key).second)
            throw ConfigInvalid(key, "duplicate key", line_no);
        if (value.empty())
            throw ConfigInvalid(key, "missing value", line_no);
        values.push_back(Value{key, value, line_no});
    }

    ExperimentConfig cfg;
    std::set<std::string> explicit_keys = seen;
    for (const auto & v : values)
        if (v.key == "preset") {
            try {
                cfg = preset(v.text);
            } catch (const ConfigInvalid &) {
                throw ConfigInvalid("preset", "unknown preset '" + v.text + "'", v.line);
            }
            explicit_keys.merge(preset_keys());
        }
    for (const auto & v : values)
        find_key(v.key)->set(cfg, v, base_dir);
    if (!seen.count("compare.reference") && !cfg.methods.empty() &&
        std::none_of(cfg.methods.begin(), cfg.methods.end(), [&](const MethodSpec & m) { return m.name() == cfg.reference; }))
        cfg.reference = cfg.methods.front().name();

    // Validation errors from cross-field checks name the field; attach its line.
    try {
        finish(cfg, explicit_keys);
    } catch (const ConfigInvalid & e) {
        for (const auto & v : values)
            if (v.key == e.field())
                throw ConfigInvalid(e.field(), std::string(e.what()).substr(e.field().size() + 2), v.line);
        throw;
    }
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path & path)
{
    std::string text;
    try {
        text = csv::read_file(path);
    } catch (const Error &) {
        throw ConfigInvalid("", "cannot read config file " + path.string());
    }
    return parse_config_text(text, path.parent_path());
}

void validate(const ExperimentConfig & c)
{
    if (static_cast<Index>(c.x0.size()) != c.outputs)
        throw ConfigInvalid("horizon.x0", "needs " + std::to_string(c.outputs) + " value(s), one per output");
    if (c.methods.empty())
        throw ConfigInvalid("methods", "at least one method is required");
    bool has_reference = false;
    for (const auto & m : c.methods) {
        has_reference = has_reference || m.name() == c.reference;
        if (m.kind == MethodKind::Proxy) {
            if (c.outputs != 1)
                throw ConfigInvalid("methods", "proxy methods need a scalar state (model.kernel.outputs = 1)");
            if (!c.inputs_path.empty())
                throw ConfigInvalid("methods", "proxy methods do not support control inputs");
        }
    }
    if (!has_reference)
        throw ConfigInvalid("compare.reference", "'" + c.reference + "' is not one of the configured methods");
    if (c.basis.construction == BasisConstruction::Nystrom && c.basis.nystrom_points < c.basis.m)
        throw ConfigInvalid("basis.nystrom.points", "must be at least basis.m");
    if (!c.training_data.empty() && !std::filesystem::exists(c.training_data))
        throw ConfigInvalid("model.training_data", "file not found: " + c.training_data.string());
    if (!c.inputs_path.empty() && !std::filesystem::exists(c.inputs_path))
        throw ConfigInvalid("inputs.path", "file not found: " + c.inputs_path.string());
}

std::string echo(const ExperimentConfig & cfg)
{
    std::string out;
    for (const auto & k : keys()) {
        const auto v = k.show(cfg);
        if (v.empty())
            continue;
        out += k.name + " = " + v + '\n';
    }
    return out;
}

void log_defaults(const ExperimentConfig & cfg)
{
    for (const auto & name : cfg.defaulted) {
        const auto * k = find_key(name);
        const auto v = k->show(cfg);
        spdlog::info("default {} = {}{}", name, v.empty() ? "(unset)" : v, k->from_paper ? "" : " [not-from-paper]");
    }
}

Eigen::MatrixXd load_inputs(const ExperimentConfig & cfg)
{
    if (cfg.inputs_path.empty())
        return {};
    Eigen::MatrixXd rows = csv::read_matrix(cfg.inputs_path);
    if (rows.rows() < cfg.steps)
        throw ConfigInvalid("inputs.path", "needs at least horizon.steps = " + std::to_string(cfg.steps) + " rows, got " +
                                               std::to_string(rows.rows()));
    return rows.topRows(cfg.steps).transpose();
}

GpModel<double> build_model(const ExperimentConfig & cfg)
{
    using K = ScalarKernel<double>;
    using MK = MatrixKernel<double>;
    const Index n = cfg.outputs;
    const Eigen::MatrixXd inputs = load_inputs(cfg);
    const Index m = inputs.rows();

    MeanFn<double> mean = MeanFn<double>::zero(n + m, n);
    if (cfg.mean == "linear") {
        Eigen::MatrixXd g(n, n + m);
        g.leftCols(n) = cfg.gain * Eigen::MatrixXd::Identity(n, n);
        g.rightCols(m).setConstant(cfg.input_gain);
        mean = MeanFn<double>::linear_map(g);
    }

    K base = K::linear(cfg.sigma_f);
    if (cfg.kernel == "se")
        base = K::squared_exponential(cfg.sigma_f, cfg.lengthscale);
    else if (cfg.kernel == "linear_se")
        base = K::product(K::linear(cfg.sigma_f), K::squared_exponential(1.0, cfg.lengthscale));
    const MK kernel = cfg.coupling == "distance" ? MK::distance_coupled(base, n) : MK::independent(base, n);

    GpModel<double> model(std::move(mean), kernel, cfg.noise * Eigen::MatrixXd::Identity(n, n));
    if (!cfg.training_data.empty()) {
        const auto data = csv::read_training(cfg.training_data, n + m, n);
        model = model.condition(data.inputs, data.targets);
    }
    return model;
}

ProxySpec proxy_spec(const ExperimentConfig & cfg, ProxyVariant v)
{
    ProxySpec s;
    s.variant = v;
    s.gain = cfg.gain;
    s.sigma_f = cfg.sigma_f;
    s.sigma_w = std::sqrt(cfg.noise);
    s.x0 = cfg.x0.front();
    s.steps = cfg.steps;
    return s;
}

} // namespace gpdyn::harness
