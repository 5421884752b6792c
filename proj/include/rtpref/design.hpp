#pragma once

// Transductive and hard-query experimental designs: distributions over the
// query set minimising max_{z != z'} ||z - z'||^2 in the inverse of the
// weighted design matrix sum_x w_x lambda_x x x^T.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtpref/core.hpp"
#include "rtpref/estimation.hpp"

namespace rtpref {

/// Probability weights aligned with a query list.
struct DesignWeights {
    Vector weights;

    void validate(double tolerance = 1e-9) const {
        if (weights.size() == 0) {
            throw InvalidArgument("design weights are empty");
        }
        if ((weights.array() < 0.0).any() || !weights.allFinite()) {
            throw InvalidArgument("design weights must be finite and non-negative");
        }
        if (std::abs(weights.sum() - 1.0) > tolerance) {
            throw InvalidArgument("design weights must sum to one");
        }
    }
};

enum class DesignKind { transductive, hard };

inline std::string_view to_string(DesignKind k) {
    return k == DesignKind::transductive ? "transductive" : "hard";
}

inline DesignKind parse_design_kind(std::string_view s) {
    if (s == "transductive" || s == "trans") return DesignKind::transductive;
    if (s == "hard") return DesignKind::hard;
    throw InvalidArgument("unknown design kind '" + std::string(s) + "'");
}

/// Floor applied to the hard-query weights mu'(x^T theta).
inline constexpr double kHardWeightFloor = 1e-6;

struct FrankWolfeOptions {
    int base_iterations = 200;  // cap is max(base, per_query * |X|)
    int iterations_per_query = 10;
    double relative_tolerance = 1e-6;
    double gap_tolerance = 1e-3;  // certified distance to the optimum, relative
    double active_band = 0.05;    // pairs this close to the max enter the linearisation
    int line_search_steps = 30;
};

struct DesignResult {
    DesignWeights weights;
    double objective = kInf;
    int iterations = 0;
    std::vector<double> trajectory;  // objective after each iteration, starting at uniform
};

/// Precomputed problem data: queries as rows, survivor differences as columns.
class DesignProblem {
public:
    DesignProblem(std::span<const Vector> survivors, std::span<const Vector> queries,
                  const Vector& query_weights) {
        if (survivors.size() < 2) {
            throw InvalidArgument("design needs at least two surviving arms");
        }
        if (queries.empty()) {
            throw InvalidArgument("design needs at least one query");
        }
        if (query_weights.size() != static_cast<Eigen::Index>(queries.size())) {
            throw InvalidArgument("query_weights must align with queries");
        }
        if ((query_weights.array() < 0.0).any() || !query_weights.allFinite()) {
            throw InvalidArgument("query_weights must be finite and non-negative");
        }
        const auto d = queries.front().size();
        queries_.resize(static_cast<Eigen::Index>(queries.size()), d);
        for (std::size_t i = 0; i < queries.size(); ++i) {
            if (queries[i].size() != d) {
                throw InvalidArgument("query dimension mismatch");
            }
            queries_.row(static_cast<Eigen::Index>(i)) = queries[i].transpose();
        }
        // Ordered pairs (z, z') and (z', z) give equal norms; one per pair suffices.
        const auto k = survivors.size();
        diffs_.resize(d, static_cast<Eigen::Index>(k * (k - 1) / 2));
        Eigen::Index col = 0;
        for (std::size_t i = 0; i < k; ++i) {
            if (survivors[i].size() != d) {
                throw InvalidArgument("arm dimension mismatch");
            }
            for (std::size_t j = i + 1; j < k; ++j) {
                diffs_.col(col++) = survivors[i] - survivors[j];
            }
        }
        weights_ = query_weights;
    }

    Eigen::Index num_queries() const { return queries_.rows(); }

    /// Max over survivor pairs of the quadratic form; +inf when degenerate.
    double objective(const Vector& lambda) const {
        Matrix solved;
        return evaluate(lambda, solved).maxCoeff();
    }

    /// Per-pair quadratic forms; `solved` receives A^{-1} [z - z'].
    Vector evaluate(const Vector& lambda, Matrix& solved) const {
        return values_of_gram(gram_of(lambda), solved);
    }

    DesignResult frank_wolfe(const FrankWolfeOptions& options = {}) const;

private:
    // sum_x w_x v_x x x^T; linear in v, so it also maps directions.
    Matrix gram_of(const Vector& v) const {
        return queries_.transpose() * weights_.cwiseProduct(v).asDiagonal() * queries_;
    }

    Vector values_of_gram(const Matrix& gram, Matrix& solved) const {
        // Cholesky when clearly well conditioned, else the eigen path with the ridge rule.
        const Eigen::LLT<Matrix> llt(gram);
        if (llt.info() == Eigen::Success && llt.rcond() > 1e-10) {
            solved = llt.solve(diffs_);
        } else {
            try {
                solved = solve_many(gram, diffs_);
            } catch (const DegenerateDesign&) {
                return Vector::Constant(diffs_.cols(), kInf);
            }
        }
        Vector values = diffs_.cwiseProduct(solved).colwise().sum().transpose();
        if (!values.allFinite()) {
            values.setConstant(kInf);
        }
        return values;
    }

    struct LineResult {
        double gamma = 0.0;
        double f = kInf;
    };

    // Minimises the objective on lambda + g * direction, g in [0, g_max], by
    // golden-section search (the objective is convex along the segment).
    // The far endpoint and a trial step g_try in range are also evaluated.
    LineResult line_search(const Vector& lambda, const Vector& direction, double g_max,
                           double g_try, int steps) const {
        const Matrix base = gram_of(lambda);
        const Matrix slope = gram_of(direction);
        Matrix scratch;
        auto at = [&](double g) -> LineResult {
            return {g, values_of_gram(base + g * slope, scratch).maxCoeff()};
        };
        constexpr double kInvPhi = 0.6180339887498949;
        double lo = 0.0;
        double hi = g_max;
        LineResult r1 = at(hi - kInvPhi * (hi - lo));
        LineResult r2 = at(lo + kInvPhi * (hi - lo));
        for (int k = 0; k < steps; ++k) {
            if (r1.f <= r2.f) {
                hi = r2.gamma;
                r2 = r1;
                r1 = at(hi - kInvPhi * (hi - lo));
            } else {
                lo = r1.gamma;
                r1 = r2;
                r2 = at(lo + kInvPhi * (hi - lo));
            }
        }
        LineResult best = r1.f <= r2.f ? r1 : r2;
        // The far endpoint drops a query entirely, which the interior search never reaches.
        if (const LineResult end = at(g_max); end.f < best.f) best = end;
        if (g_try > 0.0 && g_try <= g_max) {
            if (const LineResult trial = at(g_try); trial.f < best.f) best = trial;
        }
        return best;
    }

    static Matrix solve_many(const Matrix& gram, const Matrix& rhs) {
        Matrix out(rhs.rows(), rhs.cols());
        // One eigen-decomposition for all right-hand sides, same ridge rule as estimation.
        const RegressionOptions opts;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
        if (eig.info() != Eigen::Success) {
            throw DegenerateDesign("eigen-decomposition failed");
        }
        const Vector& values = eig.eigenvalues();
        const double lo = values.minCoeff();
        const double hi = values.maxCoeff();
        double ridge = 0.0;
        if (!(hi > 0.0) || !(lo > 0.0) || hi / lo > opts.condition_limit) {
            ridge = opts.ridge_factor * gram.trace() / static_cast<double>(gram.rows());
            if (!(ridge > 0.0) || !std::isfinite(ridge)) {
                throw DegenerateDesign("design matrix singular after ridge fallback");
            }
        }
        const Vector inv = (values.array().max(0.0) + ridge).inverse().matrix();
        const Matrix& basis = eig.eigenvectors();
        out = basis * (inv.asDiagonal() * (basis.transpose() * rhs));
        return out;
    }

    Matrix queries_;  // |X| x d
    Matrix diffs_;    // d x pairs
    Vector weights_;
};

namespace detail {

/// Optimal mixed strategies of the zero-sum game with loss matrix `loss`
/// (rows minimise, columns maximise).
struct GameSolution {
    Vector row;
    Vector col;
    double value = 0.0;
};

// After shifting every loss to be positive, the row player's problem is
// max 1^T u subject to B u <= 1, u >= 0 with B the shifted loss transposed,
// solved by a dense tableau simplex from the slack basis. Then
// row = u / sum(u), value = 1 / sum(u) - shift, and the duals of the
// constraints normalised give the column strategy.
inline GameSolution solve_matrix_game(const Matrix& loss) {
    const Eigen::Index n = loss.rows();
    const Eigen::Index k = loss.cols();
    const double lo = loss.minCoeff();
    const double shift = 1.0 - lo;
    Matrix tab = Matrix::Zero(k + 1, n + k + 1);
    tab.topLeftCorner(k, n) = (loss.array() + shift).matrix().transpose();
    tab.block(0, n, k, k).setIdentity();
    tab.col(n + k).head(k).setOnes();
    tab.row(k).head(n).setConstant(-1.0);
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(k));
    for (Eigen::Index r = 0; r < k; ++r) basis[static_cast<std::size_t>(r)] = n + r;
    constexpr double kEps = 1e-12;
    const Eigen::Index dantzig_limit = 10 * (n + k);
    for (Eigen::Index it = 0; it < 50 * (n + k); ++it) {
        Eigen::Index enter = -1;
        if (it < dantzig_limit) {
            double most = -kEps;
            for (Eigen::Index j = 0; j < n + k; ++j) {
                if (tab(k, j) < most) {
                    most = tab(k, j);
                    enter = j;
                }
            }
        } else {  // Bland's rule against cycling
            for (Eigen::Index j = 0; j < n + k && enter < 0; ++j) {
                if (tab(k, j) < -kEps) enter = j;
            }
        }
        if (enter < 0) break;
        Eigen::Index leave = -1;
        double ratio = kInf;
        for (Eigen::Index r = 0; r < k; ++r) {
            const double a = tab(r, enter);
            if (a > kEps) {
                const double q = tab(r, n + k) / a;
                if (q < ratio || (q == ratio && basis[static_cast<std::size_t>(r)] <
                                                    basis[static_cast<std::size_t>(leave)])) {
                    ratio = q;
                    leave = r;
                }
            }
        }
        if (leave < 0) break;  // unbounded cannot happen with positive B
        tab.row(leave) /= tab(leave, enter);
        for (Eigen::Index r = 0; r <= k; ++r) {
            if (r != leave && tab(r, enter) != 0.0) {
                tab.row(r) -= tab(r, enter) * tab.row(leave);
            }
        }
        basis[static_cast<std::size_t>(leave)] = enter;
    }
    GameSolution out;
    out.row = Vector::Zero(n);
    for (Eigen::Index r = 0; r < k; ++r) {
        const Eigen::Index j = basis[static_cast<std::size_t>(r)];
        if (j < n) out.row(j) = std::max(0.0, tab(r, n + k));
    }
    const double total = out.row.sum();
    out.row /= total;
    out.col = tab.row(k).segment(n, k).transpose().cwiseMax(0.0);
    const double dual = out.col.sum();
    out.col = dual > 0.0 ? Vector(out.col / dual) : Vector::Constant(k, 1.0 / static_cast<double>(k));
    out.value = 1.0 / total - shift;
    return out;
}

struct LinearisedStep {
    Vector target;        // point on the simplex to move towards
    double lower_bound;   // certified lower bound on the optimal objective
    Vector score;         // gain under the pair mixture, per query
};

// Minimiser over the simplex of max_p (2 g_p - gain_p . s), the linearisation
// of the pairwise max at the current design. By convexity, for any pair
// mixture rho, 2 g . rho - max_x (gain rho)_x bounds the optimum from below.
inline LinearisedStep linearised_minimax_step(const Matrix& gain, const Vector& values) {
    const Eigen::Index nq = gain.rows();
    auto bound = [&](const Vector& rho) { return 2.0 * values.dot(rho) - (gain * rho).maxCoeff(); };
    if (gain.cols() == 1) {
        Eigen::Index vertex = 0;
        gain.col(0).maxCoeff(&vertex);
        return {Vector::Unit(nq, vertex), bound(Vector::Ones(1)), gain.col(0)};
    }
    const double scale = values.maxCoeff();
    const Matrix loss = ((2.0 * values.transpose()).replicate(nq, 1) - gain) / scale;
    const GameSolution game = solve_matrix_game(loss);
    return {game.row, bound(game.col), gain * game.col};
}

}  // namespace detail

/// Frank-Wolfe from the uniform design. The target point is the minimiser of
/// the linearised max over the nearly active arm pairs, which is a single
/// vertex when one pair is active. Each iteration compares the classic step
/// 2/(k+2), a line search towards the target, and a pairwise step that moves
/// mass off the least useful supported query. The best is taken only if it
/// lowers the objective, so the trajectory is non-increasing. Stops on a
/// small relative change, or once the linearisation certifies the design
/// within gap_tolerance of optimal.
inline DesignResult DesignProblem::frank_wolfe(const FrankWolfeOptions& options) const {
    const Eigen::Index nq = num_queries();
    const int max_iter = std::max(options.base_iterations,
                                  options.iterations_per_query * static_cast<int>(nq));
    Vector lambda = Vector::Constant(nq, 1.0 / static_cast<double>(nq));
    Matrix solved;
    Vector values = evaluate(lambda, solved);
    double f = values.maxCoeff();
    if (!std::isfinite(f)) {
        throw DegenerateDesign("design matrix singular at the uniform design");
    }
    DesignResult result;
    result.trajectory.push_back(f);
    int iter = 0;
    for (; iter < max_iter && nq > 1; ++iter) {
        if (!(f > 0.0)) {
            break;
        }
        std::vector<Eigen::Index> active;
        for (Eigen::Index p = 0; p < values.size(); ++p) {
            if (values(p) >= f * (1.0 - options.active_band)) active.push_back(p);
        }
        // gain(x, p) = w_x (x^T A^{-1} y_p)^2, the negated gradient of pair p.
        Matrix gain(nq, static_cast<Eigen::Index>(active.size()));
        Vector active_values(static_cast<Eigen::Index>(active.size()));
        for (std::size_t k = 0; k < active.size(); ++k) {
            const auto col = static_cast<Eigen::Index>(k);
            gain.col(col) =
                weights_.cwiseProduct((queries_ * solved.col(active[k])).array().square().matrix());
            active_values(col) = values(active[k]);
        }
        const auto step = detail::linearised_minimax_step(gain, active_values);
        if (f - step.lower_bound <= options.gap_tolerance * f) {
            break;
        }
        // Frank-Wolfe step towards the target, and a pairwise step moving
        // mass from the least useful supported query to the target.
        LineResult best = line_search(lambda, step.target - lambda, 1.0,
                                      2.0 / (static_cast<double>(iter) + 2.0),
                                      options.line_search_steps);
        Eigen::Index away = -1;
        for (Eigen::Index x = 0; x < nq; ++x) {
            if (lambda(x) > 0.0 && step.target(x) < 1.0 &&
                (away < 0 || step.score(x) < step.score(away))) {
                away = x;
            }
        }
        Vector direction = step.target - lambda;
        if (away >= 0) {
            Vector pairwise = step.target;
            pairwise(away) -= 1.0;
            const LineResult pair =
                line_search(lambda, pairwise, lambda(away) / (1.0 - step.target(away)), -1.0,
                            options.line_search_steps);
            if (pair.f < best.f) {
                best = pair;
                direction = std::move(pairwise);
            }
        }
        double change = 0.0;
        if (best.f < f) {
            const Vector next_lambda = (lambda + best.gamma * direction).cwiseMax(0.0);
            Matrix next_solved;
            Vector next_values = evaluate(next_lambda, next_solved);
            const double next = next_values.maxCoeff();
            if (next < f) {
                change = (f - next) / f;
                lambda = next_lambda;
                values = std::move(next_values);
                solved = std::move(next_solved);
                f = next;
            }
        }
        result.trajectory.push_back(f);
        if (change < options.relative_tolerance) {
            ++iter;
            break;
        }
    }
    lambda = lambda.cwiseMax(0.0);
    lambda /= lambda.sum();
    result.weights.weights = std::move(lambda);
    result.objective = objective(result.weights.weights);
    result.iterations = iter;
    return result;
}

/// max_{z != z'} ||z - z'||^2 over (sum_x w_x lambda_x x x^T)^{-1}.
/// Returns +inf when the weighted design matrix is singular after the ridge fallback.
inline double design_objective(const DesignWeights& lambda, std::span<const Vector> survivors,
                               std::span<const Vector> queries, const Vector& query_weights) {
    const DesignProblem problem(survivors, queries, query_weights);
    if (lambda.weights.size() != problem.num_queries()) {
        throw InvalidArgument("design weights must align with queries");
    }
    return problem.objective(lambda.weights);
}

/// Per-query weights: all ones (transductive) or floored mu'(x^T theta_ref) (hard).
inline Vector design_query_weights(DesignKind kind, std::span<const Vector> queries,
                                   const std::optional<Vector>& theta_ref) {
    const auto nq = static_cast<Eigen::Index>(queries.size());
    if (kind == DesignKind::transductive) {
        return Vector::Ones(nq);
    }
    if (!theta_ref) {
        throw InvalidArgument("hard design needs a reference estimate");
    }
    Vector w(nq);
    for (Eigen::Index i = 0; i < nq; ++i) {
        const Vector& x = queries[static_cast<std::size_t>(i)];
        if (x.size() != theta_ref->size()) {
            throw InvalidArgument("theta_ref dimension mismatch");
        }
        w(i) = std::max(kHardWeightFloor, logistic_derivative(x.dot(*theta_ref)));
    }
    return w;
}

inline DesignResult compute_design_detailed(DesignKind kind, std::span<const Vector> survivors,
                                            std::span<const Vector> queries,
                                            const std::optional<Vector>& theta_ref,
                                            const FrankWolfeOptions& options = {}) {
    const Vector w = design_query_weights(kind, queries, theta_ref);
    const DesignProblem problem(survivors, queries, w);
    return problem.frank_wolfe(options);
}

inline DesignWeights compute_design(DesignKind kind, std::span<const Vector> survivors,
                                    std::span<const Vector> queries,
                                    const std::optional<Vector>& theta_ref = std::nullopt,
                                    const FrankWolfeOptions& options = {}) {
    return compute_design_detailed(kind, survivors, queries, theta_ref, options).weights;
}

}  // namespace rtpref
