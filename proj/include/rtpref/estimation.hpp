#pragma once

// Utility estimators over per-query sufficient statistics.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "rtpref/core.hpp"
#include "rtpref/diffusion_model.hpp"

namespace rtpref {

/// Sufficient statistics for one query.
struct QueryStats {
    std::size_t query_id = 0;
    Vector x;
    std::int64_t n = 0;
    std::int64_t sum_choice = 0;
    double sum_decision_time = 0.0;
    double sum_response_time = 0.0;
    std::int64_t n_pos = 0;

    double mean_choice() const { return static_cast<double>(sum_choice) / static_cast<double>(n); }
    double mean_decision_time() const { return sum_decision_time / static_cast<double>(n); }
    double choice_frequency() const {
        return static_cast<double>(n_pos) / static_cast<double>(n);
    }
};

/// Per-query aggregated observations, in first-seen order.
class QueryDataset {
public:
    QueryDataset() = default;

    /// Accumulates one observation of query `query_id` with feature vector x.
    void add(std::size_t query_id, const Vector& x, const QueryOutcome& outcome) {
        if (outcome.choice != 1 && outcome.choice != -1) {
            throw InvalidArgument("choice must be -1 or +1");
        }
        if (!(outcome.decision_time > 0.0)) {
            throw InvalidArgument("decision time must be positive");
        }
        QueryStats& s = entry_for(query_id, x);
        s.n += 1;
        s.sum_choice += outcome.choice;
        s.n_pos += outcome.choice > 0 ? 1 : 0;
        s.sum_decision_time += outcome.decision_time;
        s.sum_response_time += outcome.response_time;
    }

    /// Inserts pre-aggregated statistics; the query must not be present yet.
    void add_stats(QueryStats stats) {
        validate_stats(stats);
        if (index_.contains(stats.query_id)) {
            throw InvalidArgument("duplicate query_id " + std::to_string(stats.query_id));
        }
        check_dimension(stats.x);
        index_.emplace(stats.query_id, entries_.size());
        entries_.push_back(std::move(stats));
    }

    const std::vector<QueryStats>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    Eigen::Index dimension() const { return entries_.empty() ? 0 : entries_.front().x.size(); }

    std::int64_t total_samples() const {
        std::int64_t n = 0;
        for (const auto& e : entries_) {
            n += e.n;
        }
        return n;
    }

    static void validate_stats(const QueryStats& s) {
        const std::string id = "query " + std::to_string(s.query_id) + ": ";
        if (s.n < 1) {
            throw InvalidArgument(id + "n must be at least 1");
        }
        if (s.n_pos < 0 || s.n_pos > s.n) {
            throw InvalidArgument(id + "n_pos out of range");
        }
        if (s.sum_choice != 2 * s.n_pos - s.n) {
            throw InvalidArgument(id + "sum_choice must equal 2 n_pos - n");
        }
        if (!(s.sum_decision_time > 0.0) || !std::isfinite(s.sum_decision_time)) {
            throw InvalidArgument(id + "sum_decision_time must be positive");
        }
        if (!(s.sum_response_time > 0.0) || !std::isfinite(s.sum_response_time)) {
            throw InvalidArgument(id + "sum_response_time must be positive");
        }
        if (s.x.size() == 0 || !s.x.allFinite()) {
            throw InvalidArgument(id + "feature vector must be non-empty and finite");
        }
    }

private:
    void check_dimension(const Vector& x) const {
        if (!entries_.empty() && x.size() != entries_.front().x.size()) {
            throw InvalidArgument("query dimension mismatch in dataset");
        }
    }

    QueryStats& entry_for(std::size_t query_id, const Vector& x) {
        if (auto it = index_.find(query_id); it != index_.end()) {
            QueryStats& s = entries_[it->second];
            if (s.x.size() != x.size() || s.x != x) {
                throw InvalidArgument("query_id " + std::to_string(query_id) +
                                      " reused with a different feature vector");
            }
            return s;
        }
        check_dimension(x);
        index_.emplace(query_id, entries_.size());
        QueryStats s;
        s.query_id = query_id;
        s.x = x;
        entries_.push_back(std::move(s));
        return entries_.back();
    }

    std::vector<QueryStats> entries_;
    std::unordered_map<std::size_t, std::size_t> index_;
};

/// Which scaled version of theta* an estimate targets. All three induce the
/// same arm ranking.
enum class Scale { theta_over_a, two_a_theta, theta_unit };

inline std::string_view to_string(Scale s) {
    switch (s) {
        case Scale::theta_over_a: return "theta_over_a";
        case Scale::two_a_theta: return "two_a_theta";
        case Scale::theta_unit: return "theta_unit";
    }
    return "unknown";
}

struct UtilityEstimate {
    Vector theta_hat;
    Scale scale = Scale::theta_over_a;
};

enum class TimeSource { decision, response };

/// Estimator variants available to GSE and the harness.
enum class EstimatorKind { chdt, chdt_rt, ch_mle, ch_logit, chdt_logit };

inline std::string_view to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::chdt: return "chdt";
        case EstimatorKind::chdt_rt: return "chdt_rt";
        case EstimatorKind::ch_mle: return "ch_mle";
        case EstimatorKind::ch_logit: return "ch_logit";
        case EstimatorKind::chdt_logit: return "chdt_logit";
    }
    return "unknown";
}

inline EstimatorKind parse_estimator_kind(std::string_view s) {
    if (s == "chdt") return EstimatorKind::chdt;
    if (s == "chdt_rt") return EstimatorKind::chdt_rt;
    if (s == "ch_mle" || s == "ch") return EstimatorKind::ch_mle;
    if (s == "ch_logit") return EstimatorKind::ch_logit;
    if (s == "chdt_logit") return EstimatorKind::chdt_logit;
    throw InvalidArgument("unknown estimator kind '" + std::string(s) + "'");
}

/// Ridge fallback for ill-conditioned Gram matrices.
struct RegressionOptions {
    bool ridge_fallback = true;
    double condition_limit = 1e12;
    double ridge_factor = 1e-8;  // times trace(Gram)/d
};

struct MleOptions {
    double l2 = 1e-6;  // penalty l2 * ||theta||^2
    double gradient_tolerance = 1e-9;
    int max_iterations = 100;
};

/// Solves Gram * theta = rhs for a symmetric PSD Gram matrix. When the
/// condition estimate exceeds the limit, lambda = factor * trace/d is added
/// to the diagonal (if enabled); a still-singular system is rejected.
inline Vector solve_gram(const Matrix& gram, const Vector& rhs,
                         const RegressionOptions& options = {}) {
    const auto d = gram.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success) {
        throw DegenerateDesign("eigen-decomposition of the Gram matrix failed");
    }
    const Vector& values = eig.eigenvalues();
    const double lo = values.minCoeff();
    const double hi = values.maxCoeff();
    double ridge = 0.0;
    if (!(hi > 0.0) || !(lo > 0.0) || hi / lo > options.condition_limit) {
        if (!options.ridge_fallback) {
            throw DegenerateDesign("Gram matrix is singular or ill-conditioned (condition estimate " +
                                   std::to_string(lo > 0.0 ? hi / lo : kInf) + ")");
        }
        ridge = options.ridge_factor * gram.trace() / static_cast<double>(d);
        if (!(ridge > 0.0) || !std::isfinite(ridge)) {
            throw DegenerateDesign("Gram matrix is singular after ridge fallback");
        }
    }
    const Vector shifted = (values.array().max(0.0) + ridge).matrix();
    if (!(shifted.minCoeff() > 0.0)) {
        throw DegenerateDesign("Gram matrix is singular after ridge fallback");
    }
    const Matrix& basis = eig.eigenvectors();
    return basis * (basis.transpose() * rhs).cwiseQuotient(shifted);
}

namespace detail {

inline void require_data(const QueryDataset& data) {
    if (data.empty()) {
        throw InvalidArgument("estimator needs at least one query");
    }
}

// (sum n_x x x^T)^{-1} sum n_x x r_x
template <typename Response>
Vector weighted_regression(const QueryDataset& data, Response&& response,
                           const RegressionOptions& options) {
    require_data(data);
    const auto d = data.dimension();
    Matrix gram = Matrix::Zero(d, d);
    Vector rhs = Vector::Zero(d);
    for (const auto& e : data.entries()) {
        const double n = static_cast<double>(e.n);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(e.x, n);
        rhs += n * response(e) * e.x;
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    return solve_gram(gram, rhs, options);
}

}  // namespace detail

/// Replaces an empirical frequency of exactly 0 or 1 by 1/(2n) or 1 - 1/(2n).
inline double clamp_probability(double p, std::int64_t n) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidArgument("clamp_probability: p must lie in [0, 1]");
    }
    if (n < 1) {
        throw InvalidArgument("clamp_probability: n must be at least 1");
    }
    const double half_inv = 0.5 / static_cast<double>(n);
    if (p == 1.0) {
        return 1.0 - half_inv;
    }
    if (p == 0.0) {
        return half_inv;
    }
    return p;
}

/// Single-query choice/decision-time ratio, an estimate of u/a.
inline double estimate_single_chdt(std::int64_t n, std::int64_t sum_choice, double sum_time) {
    if (n < 1) {
        throw InvalidArgument("estimate_single_chdt: n must be at least 1");
    }
    if (!(sum_time > 0.0)) {
        throw InvalidArgument("estimate_single_chdt: time sum must be positive");
    }
    return static_cast<double>(sum_choice) / sum_time;
}

/// Single-query logit of the (clamped) choice frequency, an estimate of 2 a u.
inline double estimate_single_ch_logit(std::int64_t n, std::int64_t n_pos) {
    if (n < 1 || n_pos < 0 || n_pos > n) {
        throw InvalidArgument("estimate_single_ch_logit: need n >= 1 and 0 <= n_pos <= n");
    }
    const double p = static_cast<double>(n_pos) / static_cast<double>(n);
    return logit(clamp_probability(p, n));
}

/// Choice-decision-time estimator: OLS of per-query sum(c)/sum(t) ratios.
/// Targets theta*/a.
inline UtilityEstimate estimate_chdt(const QueryDataset& data,
                                     TimeSource time_source = TimeSource::decision,
                                     const RegressionOptions& options = {}) {
    auto ratio = [time_source](const QueryStats& e) {
        const double t =
            time_source == TimeSource::decision ? e.sum_decision_time : e.sum_response_time;
        return estimate_single_chdt(e.n, e.sum_choice, t);
    };
    return {detail::weighted_regression(data, ratio, options), Scale::theta_over_a};
}

/// Choice-only estimator: OLS of clamped per-query logits. Targets 2 a theta*.
inline UtilityEstimate estimate_ch_logit(const QueryDataset& data,
                                         const RegressionOptions& options = {}) {
    auto response = [](const QueryStats& e) { return estimate_single_ch_logit(e.n, e.n_pos); };
    return {detail::weighted_regression(data, response, options), Scale::two_a_theta};
}

/// Per-query value sgn(C) sqrt(max(0, C/T * logit(p)/2)) with empirical plug-ins.
inline double chdt_logit_response(const QueryStats& e) {
    const double c = e.mean_choice();
    if (c == 0.0) {
        return 0.0;
    }
    const double t = e.mean_decision_time();
    const double lg = logit(clamp_probability(e.choice_frequency(), e.n));
    const double arg = std::max(0.0, (c / t) * 0.5 * lg);
    return (c > 0.0 ? 1.0 : -1.0) * std::sqrt(arg);
}

/// Choice-decision-time logit estimator. Targets theta* itself.
inline UtilityEstimate estimate_chdt_logit(const QueryDataset& data,
                                           const RegressionOptions& options = {}) {
    return {detail::weighted_regression(data, chdt_logit_response, options), Scale::theta_unit};
}

namespace detail {

inline double logistic_objective(const QueryDataset& data, const Vector& theta, double l2) {
    double f = l2 * theta.squaredNorm();
    for (const auto& e : data.entries()) {
        const double eta = e.x.dot(theta);
        const auto neg = static_cast<double>(e.n - e.n_pos);
        f += static_cast<double>(e.n_pos) * log1p_exp(-eta) + neg * log1p_exp(eta);
    }
    return f;
}

}  // namespace detail

/// Choice-only logistic MLE with a small L2 penalty, by damped Newton.
/// Targets 2 a theta*.
inline UtilityEstimate estimate_ch_mle(const QueryDataset& data, const MleOptions& options = {}) {
    detail::require_data(data);
    const auto d = data.dimension();
    Vector theta = Vector::Zero(d);
    double f = detail::logistic_objective(data, theta, options.l2);
    for (int iter = 0; iter <= options.max_iterations; ++iter) {
        Vector grad = 2.0 * options.l2 * theta;
        Matrix hess = 2.0 * options.l2 * Matrix::Identity(d, d);
        for (const auto& e : data.entries()) {
            const double eta = e.x.dot(theta);
            const double n = static_cast<double>(e.n);
            const double pos = static_cast<double>(e.n_pos);
            // d/d eta of the per-query negative log-likelihood
            const double g = -pos * logistic(-eta) + (n - pos) * logistic(eta);
            grad += g * e.x;
            hess.selfadjointView<Eigen::Lower>().rankUpdate(e.x, n * logistic_derivative(eta));
        }
        if (grad.norm() < options.gradient_tolerance) {
            return {theta, Scale::two_a_theta};
        }
        if (iter == options.max_iterations) {
            break;
        }
        hess = hess.selfadjointView<Eigen::Lower>();
        const Eigen::LDLT<Matrix> ldlt(hess);
        Vector step = ldlt.solve(grad);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            step = solve_gram(hess, grad);
        }
        double t = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 60; ++halving) {
            Vector candidate = theta - t * step;
            const double fc = detail::logistic_objective(data, candidate, options.l2);
            if (fc < f) {
                theta = std::move(candidate);
                f = fc;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if (!improved) {
            // No representable descent: stationary to working precision when
            // the Newton decrement is negligible against the objective.
            const double decrement = grad.dot(step);
            if (decrement <= 1e-12 * (1.0 + std::abs(f))) {
                return {theta, Scale::two_a_theta};
            }
            break;
        }
    }
    throw SolverError("logistic MLE did not converge within " +
                          std::to_string(options.max_iterations) + " Newton iterations",
                      theta);
}

/// Dispatches on the estimator variant. chdt_rt uses response-time sums;
/// every other variant uses decision times.
inline UtilityEstimate estimate(EstimatorKind kind, const QueryDataset& data,
                                const RegressionOptions& regression = {},
                                const MleOptions& mle = {}) {
    switch (kind) {
        case EstimatorKind::chdt: return estimate_chdt(data, TimeSource::decision, regression);
        case EstimatorKind::chdt_rt: return estimate_chdt(data, TimeSource::response, regression);
        case EstimatorKind::ch_mle: return estimate_ch_mle(data, mle);
        case EstimatorKind::ch_logit: return estimate_ch_logit(data, regression);
        case EstimatorKind::chdt_logit: return estimate_chdt_logit(data, regression);
    }
    throw InvalidArgument("unknown estimator kind");
}

}  // namespace rtpref
