#ifndef GPDYN_ERROR_HPP
#define GPDYN_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace gpdyn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error
{
public:
    using Error::Error;
};

class DimensionMismatch : public Error
{
public:
    using Error::Error;
};

class NotSymmetric : public Error
{
public:
    using Error::Error;
};

/// A simulated state left the finite range (|x| > 1e100 or NaN/Inf).
class NonFinite : public Error
{
public:
    NonFinite(const std::string & what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")")
        , step_(step)
    {}

    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

class UnsupportedMethod : public Error
{
public:
    using Error::Error;
};

/// Fewer eigenvalues than requested exceed the relative threshold.
class DegenerateSpectrum : public Error
{
public:
    DegenerateSpectrum(const std::string & what, std::size_t achievable)
        : Error(what)
        , achievable_(achievable)
    {}

    std::size_t achievable() const { return achievable_; }

private:
    std::size_t achievable_;
};

class InsufficientSamples : public Error
{
public:
    using Error::Error;
};

class ConfigInvalid : public Error
{
public:
    ConfigInvalid(std::string field, const std::string & what, std::size_t line = 0)
        : Error(format(field, what, line))
        , field_(std::move(field))
        , line_(line)
    {}

    const std::string & field() const { return field_; }
    std::size_t line() const { return line_; }

private:
    static std::string format(const std::string & field, const std::string & what, std::size_t line)
    {
        std::string out = field.empty() ? what : field + ": " + what;
        if (line > 0)
            out += " (line " + std::to_string(line) + ")";
        return out;
    }

    std::string field_;
    std::size_t line_;
};

} // namespace gpdyn

#endif
