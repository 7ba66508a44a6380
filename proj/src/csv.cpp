#include "gpdyn/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "gpdyn/error.hpp"

namespace gpdyn::csv {

std::string format_number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_number(std::string_view text)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
        text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    if (!text.empty() && text.front() == '+')
        text.remove_prefix(1);
    double v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty())
        throw Error("not a number: '" + std::string(text) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

void write_file_atomic(const std::filesystem::path & path, const std::string & content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path & path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trajectories(const TrajectoryBatch & batch)
{
    std::string out = "traj,step";
    for (Index i = 0; i < batch.state_dim; ++i)
        out += ",x" + std::to_string(i + 1);
    out += '\n';
    for (std::size_t t = 0; t < batch.samples(); ++t) {
        const auto & s = batch.states[t];
        for (Index k = 0; k < s.cols(); ++k) {
            out += std::to_string(t) + ',' + std::to_string(k);
            for (Index i = 0; i < s.rows(); ++i)
                out += ',' + format_number(s(i, k));
            out += '\n';
        }
    }
    return out;
}

std::string moments(const Eigen::MatrixXd & means, const std::vector<Eigen::MatrixXd> & covariances)
{
    const Index n = means.rows();
    if (static_cast<Index>(covariances.size()) != means.cols())
        throw DimensionMismatch("moments CSV: one covariance per step required");
    std::string out = "step";
    for (Index i = 0; i < n; ++i)
        out += ",mean_" + std::to_string(i + 1);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            out += ",var_" + std::to_string(i + 1) + std::to_string(j + 1);
    out += '\n';
    for (Index k = 0; k < means.cols(); ++k) {
        out += std::to_string(k);
        for (Index i = 0; i < n; ++i)
            out += ',' + format_number(means(i, k));
        const auto & c = covariances[static_cast<std::size_t>(k)];
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                out += ',' + format_number(c(i, j));
        out += '\n';
    }
    return out;
}

std::string moments(const MomentSequence<double> & ms)
{
    std::vector<Eigen::MatrixXd> covs;
    covs.push_back(Eigen::MatrixXd::Zero(ms.state_dim, ms.state_dim));
    for (auto & m : marginals(ms))
        covs.push_back(std::move(m.cov));
    return moments(ms.means, covs);
}

std::string moments(const std::vector<StepStatistics> & stats)
{
    if (stats.empty())
        return moments(Eigen::MatrixXd(), {});
    Eigen::MatrixXd means(stats.front().mean.size(), static_cast<Index>(stats.size()));
    std::vector<Eigen::MatrixXd> covs;
    for (std::size_t k = 0; k < stats.size(); ++k) {
        means.col(static_cast<Index>(k)) = stats[k].mean;
        covs.push_back(stats[k].covariance);
    }
    return moments(means, covs);
}

std::string matrix(const Eigen::MatrixXd & m)
{
    std::string out;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0)
                out += ',';
            out += format_number(m(i, j));
        }
        out += '\n';
    }
    return out;
}

namespace {

std::vector<std::vector<double>> numeric_rows(const std::filesystem::path & path)
{
    std::istringstream in(read_file(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#')
            continue;
        std::vector<double> row;
        try {
            for (auto field : split(line))
                row.push_back(parse_number(field));
        } catch (const Error &) {
            if (first) {
                first = false;
                continue;
            }
            throw Error(path.string() + ": non-numeric value on line " + std::to_string(line_no));
        }
        first = false;
        if (!rows.empty() && row.size() != rows.front().size())
            throw DimensionMismatch(path.string() + ": ragged row on line " + std::to_string(line_no));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

Eigen::MatrixXd read_matrix(const std::filesystem::path & path)
{
    const auto rows = numeric_rows(path);
    if (rows.empty())
        return {};
    Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return m;
}

TrainingSet read_training(const std::filesystem::path & path, Index input_dim, Index out_dim)
{
    const Eigen::MatrixXd m = read_matrix(path);
    if (m.rows() == 0)
        throw Error(path.string() + ": no training rows");
    if (m.cols() != input_dim + out_dim)
        throw DimensionMismatch(path.string() + ": expected " + std::to_string(input_dim + out_dim) + " columns, got " +
                                std::to_string(m.cols()));
    TrainingSet t;
    t.inputs = m.leftCols(input_dim).transpose();
    t.targets = m.rightCols(out_dim).transpose();
    return t;
}

} // namespace gpdyn::csv
