#pragma once

// Information weights and concentration/variance bounds for the
// choice-decision-time and choice-only estimators.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <span>
#include <string_view>

#include "rtpref/core.hpp"
#include "rtpref/diffusion_model.hpp"
#include "rtpref/estimation.hpp"

namespace rtpref::theory {

enum class WeightKind { chdt, ch };

inline std::string_view to_string(WeightKind k) { return k == WeightKind::chdt ? "chdt" : "ch"; }

namespace detail {

inline void require_barrier(double a) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw InvalidArgument("barrier must be positive and finite");
    }
}

// (2 + 2 sqrt 2)^2
inline constexpr double kChdtConstant = (2.0 + 2.0 * std::numbers::sqrt2) *
                                        (2.0 + 2.0 * std::numbers::sqrt2);
inline constexpr double kChConstant = 2.4 * 2.4;

// E[t]^2 / ((2+2 sqrt 2)^2 a^2), without the u != 0 check.
inline double chdt_nonasym_formula(double u, double a) {
    const double et = moments(u, a).mean_time;
    return et * et / (kChdtConstant * a * a);
}

}  // namespace detail

/// Asymptotic-variance weight of a query with utility difference u.
///   chdt: 1 / (a^2 V[c]/E[t]^2 + a^2 E[c]^2 V[t]/E[t]^4)
///   ch:   4 a^2 mu'(2 a u)
inline double weight_asym(WeightKind kind, double u, double a) {
    detail::require_barrier(a);
    if (kind == WeightKind::ch) {
        return 4.0 * a * a * logistic_derivative(2.0 * a * u);
    }
    const Moments m = moments(u, a);
    const double et2 = m.mean_time * m.mean_time;
    const double denom = a * a * m.var_choice / et2 +
                         a * a * m.mean_choice * m.mean_choice * m.var_time / (et2 * et2);
    return 1.0 / denom;
}

/// Weight in the single-query concentration bounds.
///   chdt: E[t]^2 / ((2+2 sqrt 2)^2 a^2), requires u != 0
///   ch:   4 a^2 mu'(2 a u) / 2.4^2
inline double weight_nonasym(WeightKind kind, double u, double a) {
    detail::require_barrier(a);
    if (kind == WeightKind::ch) {
        return 4.0 * a * a * logistic_derivative(2.0 * a * u) / detail::kChConstant;
    }
    if (u == 0.0) {
        throw DomainError("non-asymptotic chdt weight requires a nonzero utility difference");
    }
    return detail::chdt_nonasym_formula(u, a);
}

struct ConcentrationBound {
    double bound = 1.0;  // may exceed 1 (vacuous)
    bool valid = false;  // the bound's conditions hold
};

/// Tail bound P(|estimate - target| > eps) for a single query with n samples.
/// Returns valid = false when the bound's conditions fail.
inline ConcentrationBound concentration_bound(WeightKind kind, double u, double a,
                                              std::int64_t n, double eps) {
    detail::require_barrier(a);
    ConcentrationBound out;
    if (!(eps > 0.0) || n < 1 || !std::isfinite(u)) {
        return out;
    }
    const auto nd = static_cast<double>(n);
    if (kind == WeightKind::chdt) {
        if (u == 0.0) {
            return out;
        }
        const double et = moments(u, a).mean_time;
        const double cap = std::min(std::abs(u) / (std::numbers::sqrt2 * a),
                                    (1.0 + std::numbers::sqrt2) * a * std::abs(u) / et);
        if (eps > cap) {
            return out;
        }
        const double m = weight_nonasym(kind, u, a);
        out.bound = 4.0 * std::exp(-m * nd * (eps * a) * (eps * a));
        out.valid = true;
        return out;
    }
    if (!(eps < std::sqrt(1.0 / 12.0))) {
        return out;
    }
    const double slope = logistic_derivative(2.0 * a * u);
    const double floor_n =
        std::max(detail::kChConstant * std::log(6.0 * std::numbers::e) / (eps * eps),
                 64.0 * std::log(3.0) / (1.0 - 12.0 * eps * eps)) /
        slope;
    if (nd < floor_n) {
        return out;
    }
    const double m = weight_nonasym(kind, u, a);
    const double r = eps / (2.0 * a);
    out.bound = 6.0 * std::exp(-m * nd * r * r);
    out.valid = true;
    return out;
}

/// Upper bound on the asymptotic variance of sqrt(n) y^T(theta_hat_chdt - theta*/a):
/// ||y||^2 over (sum_x M x x^T)^{-1}, divided by a^2, with M the smallest
/// chdt asymptotic weight over the queries.
inline double asymptotic_variance_bound(const Vector& y, std::span<const Vector> queries,
                                        const DiffusionParams& params) {
    params.validate();
    if (queries.empty()) {
        throw DegenerateDesign("asymptotic_variance_bound: empty query list");
    }
    const auto d = params.dimension();
    if (y.size() != d) {
        throw InvalidArgument("asymptotic_variance_bound: direction dimension mismatch");
    }
    const double a = params.barrier_a;
    Matrix gram = Matrix::Zero(d, d);
    double min_weight = kInf;
    for (const Vector& x : queries) {
        const double u = utility_difference(x, params);
        min_weight = std::min(min_weight, weight_asym(WeightKind::chdt, u, a));
        gram += x * x.transpose();
    }
    RegressionOptions strict;
    strict.ridge_fallback = false;
    const Vector solved = solve_gram(min_weight * gram, y, strict);
    return y.dot(solved) / (a * a);
}

/// One row of the weight-curve table.
struct CurvePoint {
    double u;
    double a;
    double m_chdt_asym;
    double m_ch_asym;
    double sqrt_m_chdt_nonasym;
    double sqrt_m_ch_nonasym;
};

/// Weight curves on u in [u_min, u_max] (step) for each barrier. At u = 0
/// the chdt non-asymptotic column holds the continuous extension E[t] = a^2.
inline std::vector<CurvePoint> weight_curves(std::span<const double> barriers, double u_min = -4.0,
                                             double u_max = 4.0, double step = 0.05) {
    std::vector<CurvePoint> rows;
    const auto count = static_cast<int>(std::floor((u_max - u_min) / step + 1e-9)) + 1;
    for (const double a : barriers) {
        for (int i = 0; i < count; ++i) {
            double u = u_min + step * i;
            if (std::abs(u) < 1e-12) {
                u = 0.0;
            }
            rows.push_back({u, a, weight_asym(WeightKind::chdt, u, a),
                            weight_asym(WeightKind::ch, u, a),
                            std::sqrt(detail::chdt_nonasym_formula(u, a)),
                            std::sqrt(weight_nonasym(WeightKind::ch, u, a))});
        }
    }
    return rows;
}

inline void write_curves_csv(const std::vector<CurvePoint>& rows, std::ostream& out) {
    out << "u,a,m_chdt_asym,m_ch_asym,sqrt_m_chdt_nonasym,sqrt_m_ch_nonasym\n";
    for (const auto& r : rows) {
        out << format_real(r.u) << ',' << format_real(r.a) << ',' << format_real(r.m_chdt_asym)
            << ',' << format_real(r.m_ch_asym) << ',' << format_real(r.sqrt_m_chdt_nonasym) << ','
            << format_real(r.sqrt_m_ch_nonasym) << '\n';
    }
}

}  // namespace rtpref::theory
