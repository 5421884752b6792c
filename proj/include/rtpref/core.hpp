#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rtpref {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Random stream used throughout the library. One stream per thread.
using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Error hierarchy
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (bad dimension, non-positive barrier...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Gram matrix singular even after the ridge fallback.
class DegenerateDesign : public Error {
public:
    using Error::Error;
};

/// A bound's precondition does not hold (e.g. zero utility difference).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iterative solver hit its iteration cap; carries the last iterate.
class SolverError : public Error {
public:
    SolverError(const std::string& what, Vector last_iterate)
        : Error(what), last_iterate_(std::move(last_iterate)) {}
    const Vector& last_iterate() const noexcept { return last_iterate_; }

private:
    Vector last_iterate_;
};

/// A GSE phase could not take a single sample.
class BudgetExhausted : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed file whose content violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

/// Uniform draw on the open interval (0, 1) from the top 53 bits.
inline double uniform_open01(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Logistic function mu(y) = 1 / (1 + exp(-y)).
inline double logistic(double y) {
    if (y >= 0.0) {
        return 1.0 / (1.0 + std::exp(-y));
    }
    const double e = std::exp(y);
    return e / (1.0 + e);
}

/// Derivative of the logistic function, mu(y) (1 - mu(y)).
inline double logistic_derivative(double y) {
    const double e = std::exp(-std::abs(y));
    return e / ((1.0 + e) * (1.0 + e));
}

/// Inverse of the logistic function, log(p / (1 - p)).
inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// log(1 + exp(y)) without overflow.
inline double log1p_exp(double y) {
    if (y > 0.0) {
        return y + std::log1p(std::exp(-y));
    }
    return std::log1p(std::exp(y));
}

/// Text for a double with 17 significant digits (round-trips exactly).
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace rtpref
