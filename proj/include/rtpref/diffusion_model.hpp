#pragma once

// Difference-based EZ-diffusion model: choices and decision times generated
// by Brownian motion with drift u = x.theta between symmetric barriers +-a.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "rtpref/core.hpp"

namespace rtpref {

/// Ground-truth human model.
struct DiffusionParams {
    Vector theta_star;
    double barrier_a = 1.0;
    double t_nondec = 0.0;

    DiffusionParams() = default;
    DiffusionParams(Vector theta, double a, double nondec)
        : theta_star(std::move(theta)), barrier_a(a), t_nondec(nondec) {
        validate();
    }

    void validate() const {
        if (!(barrier_a > 0.0) || !std::isfinite(barrier_a)) {
            throw InvalidArgument("barrier_a must be positive and finite");
        }
        if (!(t_nondec >= 0.0) || !std::isfinite(t_nondec)) {
            throw InvalidArgument("t_nondec must be non-negative and finite");
        }
        if (theta_star.size() == 0 || !theta_star.allFinite()) {
            throw InvalidArgument("theta_star must be non-empty and finite");
        }
    }

    Eigen::Index dimension() const { return theta_star.size(); }
};

/// One observation: choice in {-1,+1}, decision time, response time.
struct QueryOutcome {
    int choice = 1;
    double decision_time = 0.0;
    double response_time = 0.0;
};

/// Exact moments of (choice, decision time) for a given drift and barrier.
struct Moments {
    double p_choice_pos = 0.5;
    double mean_choice = 0.0;
    double var_choice = 1.0;
    double mean_time = 1.0;
    double var_time = 2.0 / 3.0;
};

inline double utility_difference(const Vector& x, const DiffusionParams& params) {
    if (x.size() != params.theta_star.size()) {
        throw InvalidArgument("query dimension " + std::to_string(x.size()) +
                              " does not match theta_star dimension " +
                              std::to_string(params.theta_star.size()));
    }
    return x.dot(params.theta_star);
}

namespace detail {

// Below this |a u| the zero-drift limits are used.
inline constexpr double kZeroDriftThreshold = 1e-6;

// tanh(x) - x sech^2(x), with a Taylor expansion where the difference cancels.
inline double tanh_minus_x_sech2(double x) {
    const double ax = std::abs(x);
    if (ax < 0.02) {
        const double x2 = x * x;
        const double series =
            x * x2 *
            (2.0 / 3.0 + x2 * (-8.0 / 15.0 + x2 * (34.0 / 105.0 + x2 * (-496.0 / 2835.0))));
        return series;
    }
    const double sech = 1.0 / std::cosh(x);
    return std::tanh(x) - x * sech * sech;
}

}  // namespace detail

/// Choice and decision-time moments for drift u and barrier a.
inline Moments moments(double u, double a) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw InvalidArgument("moments: barrier must be positive and finite");
    }
    if (!std::isfinite(u)) {
        throw InvalidArgument("moments: utility difference must be finite");
    }
    Moments m;
    const double x = a * u;
    m.p_choice_pos = logistic(2.0 * x);
    m.mean_choice = std::tanh(x);
    m.var_choice = 1.0 - m.mean_choice * m.mean_choice;
    const double a2 = a * a;
    if (std::abs(x) < detail::kZeroDriftThreshold) {
        m.mean_time = a2;
        m.var_time = 2.0 * a2 * a2 / 3.0;
    } else {
        // E[t] = (a/u) tanh(au) = a^2 tanh(x)/x
        m.mean_time = a2 * std::tanh(x) / x;
        // V[t] = (a/u^3) (tanh(au) - au sech^2(au)) = a^4 h(x)/x^3
        m.var_time = a2 * a2 * detail::tanh_minus_x_sech2(x) / (x * x * x);
    }
    return m;
}

namespace detail {

// exp(x^2) erfc(x) for x >= 0.
inline double erfcx(double x) {
    if (x < 26.0) {
        return std::exp(x * x) * std::erfc(x);
    }
    const double inv2 = 1.0 / (x * x);
    const double series =
        1.0 + inv2 * (-0.5 + inv2 * (0.75 + inv2 * (-1.875 + inv2 * (6.5625 + inv2 * -29.53125))));
    return series / (x * std::sqrt(std::numbers::pi));
}

// Normalised first-passage law: barrier 1, drift v, time tau = t / a^2.
// Below the switch the image (small-time) expansion converges fastest,
// above it the eigenfunction (large-time) expansion does.
inline constexpr double kRegimeSwitch = 0.5;
inline constexpr int kMaxTerms = 4000;

struct CdfDensity {
    double cdf;
    double survival;
    double density;
};

inline CdfDensity unit_first_passage(double v, double tau) {
    const double nu = std::abs(v);
    if (!(tau > 0.0)) {
        return {0.0, 1.0, 0.0};
    }
    if (std::isinf(tau)) {
        return {1.0, 0.0, 0.0};
    }
    // 2 cosh(v) = e^{nu} (1 + e^{-2 nu}); the e^{nu} factor is folded into exponents.
    const double cosh_tail = 1.0 + std::exp(-2.0 * nu);
    if (tau < kRegimeSwitch) {
        const double sqrt_tau = std::sqrt(tau);
        const double drift_decay = nu - 0.5 * nu * nu * tau;
        const double dens_scale = 1.0 / std::sqrt(2.0 * std::numbers::pi * tau * tau * tau);
        double cdf_sum = 0.0;
        double dens_sum = 0.0;
        for (int m = 0; m < kMaxTerms; ++m) {
            const double c = 2.0 * m + 1.0;
            const double sign = (m % 2 == 0) ? 1.0 : -1.0;
            const double gauss = drift_decay - c * c / (2.0 * tau);
            // e^{nu} e^{-c nu} Phi((nu tau - c)/sqrt(tau))
            double lower;
            const double z = (nu * tau - c) / sqrt_tau;
            if (z >= 0.0) {
                lower = std::exp(nu - c * nu) * 0.5 * std::erfc(-z / std::numbers::sqrt2);
            } else {
                lower = 0.5 * erfcx(-z / std::numbers::sqrt2) * std::exp(gauss);
            }
            // e^{nu} e^{c nu} Phi(-(nu tau + c)/sqrt(tau))
            const double y = (nu * tau + c) / sqrt_tau;
            const double upper = 0.5 * erfcx(y / std::numbers::sqrt2) * std::exp(gauss);
            const double cdf_term = sign * (lower + upper);
            const double dens_term = sign * c * dens_scale * std::exp(gauss);
            cdf_sum += cdf_term;
            dens_sum += dens_term;
            if (m >= 1 && std::abs(cdf_term) < 1e-18 &&
                std::abs(dens_term) <= 1e-17 * std::abs(dens_sum)) {
                break;
            }
        }
        const double cdf = std::clamp(cosh_tail * cdf_sum, 0.0, 1.0);
        const double dens = std::max(0.0, cosh_tail * dens_sum);
        return {cdf, 1.0 - cdf, dens};
    }
    const double half_cosh_log = nu + std::log(cosh_tail) - std::numbers::ln2;  // log cosh(v)
    double surv_sum = 0.0;
    double dens_sum = 0.0;
    for (int j = 0; j < kMaxTerms; ++j) {
        const double omega = (2.0 * j + 1.0) * std::numbers::pi / 2.0;
        const double rate = v * v + omega * omega;
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        const double e = std::exp(half_cosh_log - 0.5 * rate * tau);
        const double surv_term = sign * 2.0 * omega / rate * e;
        const double dens_term = sign * omega * e;
        surv_sum += surv_term;
        dens_sum += dens_term;
        if (std::abs(surv_term) < 1e-18 && std::abs(dens_term) <= 1e-17 * std::abs(dens_sum)) {
            break;
        }
    }
    const double surv = std::clamp(surv_sum, 0.0, 1.0);
    return {1.0 - surv, surv, std::max(0.0, dens_sum)};
}

}  // namespace detail

/// First-passage-time law of Brownian motion with drift u started at 0 and
/// absorbed at +-a. Evaluated by series expansions (small-time image series
/// below t = a^2/2, large-time eigenfunction series above).
class FirstPassageTime {
public:
    FirstPassageTime(double u, double a) : u_(u), a_(a) {
        if (!(a > 0.0) || !std::isfinite(a)) {
            throw InvalidArgument("first-passage time: barrier must be positive");
        }
        if (!std::isfinite(u)) {
            throw InvalidArgument("first-passage time: drift must be finite");
        }
    }

    double drift() const { return u_; }
    double barrier() const { return a_; }

    double cdf(double t) const { return eval(t).cdf; }
    double survival(double t) const { return eval(t).survival; }
    double density(double t) const { return eval(t).density; }

    /// CDF, survival and density at t (density in 1/seconds).
    detail::CdfDensity eval(double t) const {
        const double scale = a_ * a_;
        auto r = detail::unit_first_passage(u_ * a_, t / scale);
        r.density /= scale;
        return r;
    }

private:
    double u_;
    double a_;
};

/// Inverse-CDF sampler for FirstPassageTime.
///
/// The quantile function is tabulated on an adaptive grid in probability:
/// each cell is a cubic Hermite interpolant (node slopes dt/dp = 1/f(t)) and
/// is bisected until its midpoint agrees with the exact quantile to the grid
/// tolerance. Draws outside the tabulated range, and every draw when the grid
/// is disabled, are inverted exactly by a safeguarded Newton iteration on the
/// series CDF.
class FirstPassageSampler {
public:
    static constexpr double kDefaultTolerance = 1e-10;
    static constexpr double kTailMass = 0x1.0p-12;

    /// grid_tolerance <= 0 disables the grid (exact inversion only).
    FirstPassageSampler(double u, double a, double grid_tolerance = kDefaultTolerance)
        : drift_(u * a), scale_(a * a), law_(u, a), tolerance_(grid_tolerance) {
        const double v = drift_;
        const double omega0 = std::numbers::pi / 2.0;
        tail_rate_ = 0.5 * (v * v + omega0 * omega0);
        const double nu = std::abs(v);
        tail_log_coef_ = nu + std::log1p(std::exp(-2.0 * nu)) +
                         std::log(omega0 / (v * v + omega0 * omega0));
        mean_tau_ = nu < detail::kZeroDriftThreshold ? 1.0 : std::tanh(v) / v;
        if (tolerance_ > 0.0) {
            build_grid();
        }
    }

    const FirstPassageTime& law() const { return law_; }

    /// Number of grid nodes (0 when the grid is disabled).
    std::size_t grid_size() const { return probs_.size(); }

    /// Decision time (seconds) at cumulative probability p in (0, 1).
    double quantile(double p) const {
        check_probability(p);
        if (probs_.empty() || p < probs_.front() || p > probs_.back()) {
            return exact_quantile(p);
        }
        const double pos = (p - probs_.front()) * bucket_scale_;
        const auto bucket = std::min(static_cast<std::size_t>(pos), buckets_.size() - 1);
        std::size_t hi = buckets_[bucket];
        while (hi + 1 < probs_.size() && probs_[hi] < p) {
            ++hi;
        }
        return scale_ * hermite(hi - 1, hi, p);
    }

    /// Quantile by direct inversion of the series CDF, ignoring the grid.
    double exact_quantile(double p) const {
        check_probability(p);
        double lo = 0.0;
        double hi = kInf;
        if (!probs_.empty()) {
            if (p < probs_.front()) {
                hi = taus_.front();
            } else if (p > probs_.back()) {
                lo = taus_.back();
            }
        }
        return scale_ * solve(p, lo, hi);
    }

    double operator()(Rng& rng) const { return quantile(uniform_open01(rng)); }

private:
    static void check_probability(double p) {
        if (!(p > 0.0 && p < 1.0)) {
            throw InvalidArgument("quantile: probability must lie in (0, 1)");
        }
    }

    double slope_at(double tau) const {
        return 1.0 / detail::unit_first_passage(drift_, tau).density;
    }

    static double hermite_eval(double p0, double t0, double s0, double p1, double t1,
                               double s1, double p) {
        const double h = p1 - p0;
        const double x = (p - p0) / h;
        const double x2 = x * x;
        const double x3 = x2 * x;
        return (2.0 * x3 - 3.0 * x2 + 1.0) * t0 + (x3 - 2.0 * x2 + x) * h * s0 +
               (-2.0 * x3 + 3.0 * x2) * t1 + (x3 - x2) * h * s1;
    }

    double hermite(std::size_t lo, std::size_t hi, double p) const {
        return hermite_eval(probs_[lo], taus_[lo], slopes_[lo], probs_[hi], taus_[hi],
                            slopes_[hi], p);
    }

    void build_grid() {
        constexpr int kTopCells = 32;
        const double p_min = kTailMass;
        const double p_max = 1.0 - kTailMass;
        std::vector<double> top_p(kTopCells + 1);
        std::vector<double> top_t(kTopCells + 1);
        for (int i = 0; i <= kTopCells; ++i) {
            top_p[static_cast<std::size_t>(i)] = p_min + (p_max - p_min) * i / kTopCells;
        }
        double lo = 0.0;
        for (int i = 0; i <= kTopCells; ++i) {
            const auto k = static_cast<std::size_t>(i);
            top_t[k] = solve(top_p[k], lo, kInf);
            lo = top_t[k];
        }
        push_node(top_p[0], top_t[0], slope_at(top_t[0]));
        for (int i = 0; i < kTopCells; ++i) {
            const auto k = static_cast<std::size_t>(i);
            refine(top_p[k], top_t[k], slopes_.back(), top_p[k + 1], top_t[k + 1],
                   slope_at(top_t[k + 1]), 0);
        }
        // buckets_[b] is the first node at or above the lower edge of bucket b.
        constexpr std::size_t kBuckets = 4096;
        bucket_scale_ = static_cast<double>(kBuckets) / (probs_.back() - probs_.front());
        buckets_.resize(kBuckets);
        std::size_t node = 1;
        for (std::size_t b = 0; b < kBuckets; ++b) {
            const double edge = probs_.front() + static_cast<double>(b) / bucket_scale_;
            while (node + 1 < probs_.size() && probs_[node] < edge) {
                ++node;
            }
            buckets_[b] = node;
        }
    }

    void push_node(double p, double tau, double slope) {
        probs_.push_back(p);
        taus_.push_back(tau);
        slopes_.push_back(slope);
    }

    // Emits nodes strictly after p0 up to and including p1.
    void refine(double p0, double t0, double s0, double p1, double t1, double s1, int depth) {
        const double pm = 0.5 * (p0 + p1);
        const double tm = solve(pm, t0, t1);
        const double approx = hermite_eval(p0, t0, s0, p1, t1, s1, pm);
        if (depth >= 30 || std::abs(approx - tm) <= tolerance_ * tm) {
            push_node(p1, t1, s1);
            return;
        }
        const double sm = slope_at(tm);
        refine(p0, t0, s0, pm, tm, sm, depth + 1);
        refine(pm, tm, sm, p1, t1, s1, depth + 1);
    }

    // Root of F(tau) = p on [lo, hi] in normalised time. The upper half is
    // solved against the survival function to keep tail accuracy.
    double solve(double p, double lo, double hi) const {
        const bool upper = p > 0.5;
        const double q = 1.0 - p;
        auto residual = [&](double tau, double& dens) {
            const auto r = detail::unit_first_passage(drift_, tau);
            dens = r.density;
            return upper ? q - r.survival : r.cdf - p;
        };
        double dens = 0.0;
        if (std::isinf(hi)) {
            // Leading large-time term: S(tau) ~ C exp(-rate tau).
            double guess = (tail_log_coef_ - std::log(q)) / tail_rate_;
            if (!(guess > lo)) {
                guess = std::max(lo, mean_tau_);
                if (!(guess > lo)) {
                    guess = lo + 1.0;
                }
            }
            hi = guess;
            while (residual(hi, dens) < 0.0) {
                lo = hi;
                hi *= 2.0;
            }
        }
        double tau = 0.5 * (lo + hi);
        for (int iter = 0; iter < 200; ++iter) {
            const double h = residual(tau, dens);
            if (h == 0.0) {
                return tau;
            }
            if (h < 0.0) {
                lo = tau;
            } else {
                hi = tau;
            }
            double next = dens > 0.0 ? tau - h / dens : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) {
                next = 0.5 * (lo + hi);
            }
            if (std::abs(next - tau) <= 1e-14 * tau || hi - lo <= 1e-15 * hi) {
                return next;
            }
            tau = next;
        }
        return tau;
    }

    double drift_;
    double scale_;
    FirstPassageTime law_;
    double tolerance_;
    double tail_rate_ = 0.0;
    double tail_log_coef_ = 0.0;
    double mean_tau_ = 1.0;
    std::vector<double> probs_;
    std::vector<double> taus_;
    std::vector<double> slopes_;
    std::vector<std::size_t> buckets_;
    double bucket_scale_ = 0.0;
};

/// One decision-time draw (seconds) for drift u and barrier a, by exact
/// inversion. Use FirstPassageSampler directly for repeated draws.
inline double sample_decision_time(double u, double a, Rng& rng) {
    const FirstPassageSampler sampler(u, a, 0.0);
    return sampler(rng);
}

namespace detail {

inline int sample_choice(double u, double a, Rng& rng) {
    return uniform_open01(rng) < logistic(2.0 * a * u) ? 1 : -1;
}

}  // namespace detail

/// Choice and decision time are independent under symmetric barriers, so
/// they are drawn separately: choice first, then the decision time.
inline QueryOutcome sample_outcome(const DiffusionParams& params, const Vector& x, Rng& rng) {
    if (!(params.barrier_a > 0.0)) {
        throw InvalidArgument("sample_outcome: barrier must be positive");
    }
    const double u = utility_difference(x, params);
    QueryOutcome out;
    out.choice = detail::sample_choice(u, params.barrier_a, rng);
    out.decision_time = sample_decision_time(u, params.barrier_a, rng);
    out.response_time = params.t_nondec + out.decision_time;
    return out;
}

/// sample_outcome with a precomputed sampler for the query's drift.
inline QueryOutcome sample_outcome(const DiffusionParams& params, double u,
                                   const FirstPassageSampler& sampler, Rng& rng) {
    QueryOutcome out;
    out.choice = detail::sample_choice(u, params.barrier_a, rng);
    out.decision_time = sampler(rng);
    out.response_time = params.t_nondec + out.decision_time;
    return out;
}

}  // namespace rtpref
