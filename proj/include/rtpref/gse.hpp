#pragma once

// Generalized Successive Elimination under a response-time budget.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rtpref/core.hpp"
#include "rtpref/design.hpp"
#include "rtpref/diffusion_model.hpp"
#include "rtpref/estimation.hpp"
#include "rtpref/instances.hpp"

namespace rtpref {

// Queries a phase design may use: the whole query set, or only queries whose
// arms all survive.
enum class QueryScope { all, survivors };

inline std::string_view to_string(QueryScope s) { return s == QueryScope::all ? "all" : "survivors"; }

inline QueryScope parse_query_scope(std::string_view s) {
    if (s == "all") return QueryScope::all;
    if (s == "survivors") return QueryScope::survivors;
    throw InvalidArgument("unknown query scope '" + std::string(s) + "'");
}

struct GseConfig {
    double budget = 100.0;  // B, seconds
    double buffer = 0.0;    // B_buff, seconds per phase
    int eta = 2;
    DesignKind design_kind = DesignKind::transductive;
    EstimatorKind estimator_kind = EstimatorKind::chdt;
    QueryScope query_scope = QueryScope::all;

    void validate() const {
        if (!(budget > 0.0) || !std::isfinite(budget)) {
            throw InvalidArgument("budget must be positive");
        }
        if (!(buffer >= 0.0) || !std::isfinite(buffer)) {
            throw InvalidArgument("buffer must be non-negative");
        }
        if (eta < 2) {
            throw InvalidArgument("eta must be at least 2");
        }
    }
};

/// Buffer reserving one slow response: a_prior^2 + t_nondec.
inline double default_buffer(double t_nondec, double a_prior = 1.5) {
    return a_prior * a_prior + t_nondec;
}

/// Smallest S with eta^S >= num_arms.
inline int phase_count(std::size_t num_arms, int eta) {
    if (eta < 2) {
        throw InvalidArgument("eta must be at least 2");
    }
    int s = 0;
    std::size_t reach = 1;
    while (reach < num_arms) {
        reach *= static_cast<std::size_t>(eta);
        ++s;
    }
    return s;
}

struct PhaseRecord {
    int phase = 0;  // 1-based
    std::int64_t episodes = 0;
    double time = 0.0;
    std::vector<std::size_t> survivors;  // arms kept after this phase
    Vector theta_hat;
};

struct RunResult {
    std::size_t recommended_arm = 0;
    std::vector<PhaseRecord> phases;
    double total_time = 0.0;
    std::int64_t total_episodes = 0;
};

inline nlohmann::json run_result_to_json(const RunResult& r) {
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& p : r.phases) {
        phases.push_back({{"phase", p.phase},
                          {"episodes", p.episodes},
                          {"time", p.time},
                          {"survivors", p.survivors},
                          {"theta_hat", std::vector<double>(p.theta_hat.begin(), p.theta_hat.end())}});
    }
    return {{"recommended_arm", r.recommended_arm},
            {"total_time", r.total_time},
            {"total_episodes", r.total_episodes},
            {"phases", std::move(phases)}};
}

/// Source of human answers to queries.
class Feedback {
public:
    virtual ~Feedback() = default;
    virtual QueryOutcome query(std::size_t query_index, const Vector& x, Rng& rng) = 0;
};

/// One first-passage sampler per distinct |u| over a fixed query list.
/// Immutable after construction; share one bank across replications.
class SamplerBank {
public:
    SamplerBank(const DiffusionParams& params, std::span<const Vector> queries,
                double grid_tolerance = FirstPassageSampler::kDefaultTolerance)
        : params_(params) {
        params_.validate();
        std::map<double, std::size_t> seen;
        for (const Vector& x : queries) {
            const double u = utility_difference(x, params_);
            const double key = std::abs(u);
            auto it = seen.find(key);
            if (it == seen.end()) {
                it = seen.emplace(key, samplers_.size()).first;
                samplers_.emplace_back(key, params_.barrier_a, grid_tolerance);
            }
            utilities_.push_back(u);
            slot_.push_back(it->second);
        }
    }

    const DiffusionParams& params() const { return params_; }
    std::size_t size() const { return utilities_.size(); }
    double utility(std::size_t i) const { return utilities_.at(i); }
    const FirstPassageSampler& sampler(std::size_t i) const { return samplers_[slot_.at(i)]; }

    QueryOutcome draw(std::size_t i, Rng& rng) const {
        return sample_outcome(params_, utility(i), sampler(i), rng);
    }

private:
    DiffusionParams params_;
    std::vector<FirstPassageSampler> samplers_;
    std::vector<double> utilities_;
    std::vector<std::size_t> slot_;
};

/// Answers drawn from the diffusion model of the instance.
class DiffusionFeedback : public Feedback {
public:
    explicit DiffusionFeedback(std::shared_ptr<const SamplerBank> bank) : bank_(std::move(bank)) {}
    DiffusionFeedback(const DiffusionParams& params, std::span<const Vector> queries)
        : bank_(std::make_shared<const SamplerBank>(params, queries)) {}

    QueryOutcome query(std::size_t query_index, const Vector&, Rng& rng) override {
        return bank_->draw(query_index, rng);
    }

private:
    std::shared_ptr<const SamplerBank> bank_;
};

/// Deterministic answers: choice = sign(u) (ties to +1), constant decision time.
class NoiselessFeedback : public Feedback {
public:
    NoiselessFeedback(DiffusionParams params, double decision_time = 0.1)
        : params_(std::move(params)), decision_time_(decision_time) {
        if (!(decision_time > 0.0)) {
            throw InvalidArgument("decision time must be positive");
        }
    }

    QueryOutcome query(std::size_t, const Vector& x, Rng&) override {
        QueryOutcome out;
        out.choice = utility_difference(x, params_) >= 0.0 ? 1 : -1;
        out.decision_time = decision_time_;
        out.response_time = params_.t_nondec + decision_time_;
        return out;
    }

private:
    DiffusionParams params_;
    double decision_time_;
};

/// Transductive designs keyed by survivor set, for one fixed query list.
/// Thread-safe; the design is a deterministic function of the key.
class DesignCache {
public:
    // `queries` must be a function of (survivors, scope) for a given instance.
    DesignWeights get(const std::vector<std::size_t>& survivors, QueryScope scope,
                      std::span<const Vector> arms, std::span<const Vector> queries) {
        const Key key{scope, survivors};
        {
            std::lock_guard lock(mutex_);
            if (auto it = cache_.find(key); it != cache_.end()) {
                return it->second;
            }
        }
        std::vector<Vector> live;
        for (auto i : survivors) live.push_back(arms[i]);
        DesignWeights w = compute_design(DesignKind::transductive, live, queries);
        std::lock_guard lock(mutex_);
        return cache_.emplace(key, std::move(w)).first->second;
    }

private:
    using Key = std::pair<QueryScope, std::vector<std::size_t>>;
    std::mutex mutex_;
    std::map<Key, DesignWeights> cache_;
};

/// Indices of the queries a phase may use.
inline std::vector<std::size_t> phase_queries(const BanditInstance& instance,
                                              const std::vector<std::size_t>& survivors,
                                              QueryScope scope) {
    std::vector<std::size_t> out;
    auto alive = [&](std::size_t i) {
        return std::binary_search(survivors.begin(), survivors.end(), i);
    };
    for (std::size_t q = 0; q < instance.queries.size(); ++q) {
        const auto& iq = instance.queries[q];
        if (scope == QueryScope::all || (alive(iq.first) && (!iq.second || alive(*iq.second)))) {
            out.push_back(q);
        }
    }
    return out;
}

/// Top ceil(n / eta) survivors by z . theta_hat, ties to the lowest arm index.
/// Returned in ascending index order.
inline std::vector<std::size_t> eliminate(const std::vector<std::size_t>& survivors,
                                          std::span<const Vector> arms,
                                          const Vector& theta_hat, int eta) {
    if (survivors.empty()) {
        throw InvalidArgument("eliminate: no survivors");
    }
    if (eta < 2) {
        throw InvalidArgument("eta must be at least 2");
    }
    std::vector<std::pair<double, std::size_t>> scored;
    for (auto i : survivors) {
        scored.emplace_back(arms[i].dot(theta_hat), i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& l, const auto& r) {
        return l.first != r.first ? l.first > r.first : l.second < r.second;
    });
    const std::size_t keep = (survivors.size() + static_cast<std::size_t>(eta) - 1) /
                             static_cast<std::size_t>(eta);
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < keep; ++k) {
        out.push_back(scored[k].second);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<std::size_t> eliminate(const std::vector<std::size_t>& survivors,
                                          std::span<const Vector> arms,
                                          const UtilityEstimate& estimate, int eta) {
    return eliminate(survivors, arms, estimate.theta_hat, eta);
}

/// Index drawn from a discrete distribution given its cumulative sums.
inline std::size_t sample_index(const std::vector<double>& cumulative, Rng& rng) {
    const double r = uniform_open01(rng) * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

inline std::vector<double> cumulative_weights(const Vector& w) {
    std::vector<double> c(static_cast<std::size_t>(w.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        acc += w(i);
        c[static_cast<std::size_t>(i)] = acc;
    }
    return c;
}

/// Runs the phased algorithm. Each phase samples queries i.i.d. from its
/// design until the phase's response time first exceeds B/S - B_buff; the
/// overshooting sample is kept and charged. Estimation uses that phase's
/// samples only.
inline RunResult run_gse(const BanditInstance& instance, const GseConfig& config,
                         Feedback& feedback, Rng& rng, DesignCache* cache = nullptr) {
    config.validate();
    const auto& arms = instance.arms;
    const std::vector<Vector> queries = instance.query_vectors();
    if (queries.empty()) {
        throw InvalidArgument("instance has no queries");
    }
    const int phases = phase_count(arms.size(), config.eta);
    RunResult result;
    std::vector<std::size_t> survivors(arms.size());
    std::iota(survivors.begin(), survivors.end(), std::size_t{0});
    if (phases == 0) {
        result.recommended_arm = survivors.front();
        return result;
    }
    const double phase_budget = config.budget / phases - config.buffer;
    if (!(phase_budget > 0.0)) {
        throw BudgetExhausted("per-phase budget B/S - B_buff = " + format_real(phase_budget) +
                              " leaves no room for a single sample");
    }
    const double t_nondec = instance.params.t_nondec;
    Vector theta_prev = Vector::Zero(instance.dimension());
    for (int s = 1; s <= phases; ++s) {
        const std::string where = "phase " + std::to_string(s);
        const auto allowed = phase_queries(instance, survivors, config.query_scope);
        std::vector<Vector> allowed_x;
        for (auto q : allowed) allowed_x.push_back(queries[q]);
        DesignWeights design;
        try {
            if (allowed.empty()) {
                throw DegenerateDesign("no queries among the survivors");
            }
            if (config.design_kind == DesignKind::transductive && cache) {
                design = cache->get(survivors, config.query_scope, arms, allowed_x);
            } else {
                std::vector<Vector> live;
                for (auto i : survivors) live.push_back(arms[i]);
                design = compute_design(config.design_kind, live, allowed_x, theta_prev);
            }
        } catch (const DegenerateDesign& e) {
            throw DegenerateDesign(where + " design: " + e.what());
        }
        const auto cumulative = cumulative_weights(design.weights);
        QueryDataset data;
        PhaseRecord record;
        record.phase = s;
        while (record.time <= phase_budget) {
            const std::size_t qi = allowed[sample_index(cumulative, rng)];
            QueryOutcome out = feedback.query(qi, queries[qi], rng);
            if (!(out.response_time > 0.0)) {
                throw InvalidArgument(where + ": feedback returned a non-positive response time");
            }
            record.time += out.response_time;
            ++record.episodes;
            if (config.estimator_kind != EstimatorKind::chdt_rt) {
                const double dt = out.response_time - t_nondec;
                if (dt > 0.0) out.decision_time = dt;
            }
            data.add(qi, queries[qi], out);
        }
        try {
            const UtilityEstimate est = estimate(config.estimator_kind, data);
            record.theta_hat = est.theta_hat;
        } catch (const DegenerateDesign& e) {
            throw DegenerateDesign(where + " estimation: " + e.what());
        } catch (const SolverError& e) {
            throw SolverError(where + " estimation: " + e.what(), e.last_iterate());
        }
        survivors = eliminate(survivors, arms, record.theta_hat, config.eta);
        record.survivors = survivors;
        theta_prev = record.theta_hat;
        result.total_time += record.time;
        result.total_episodes += record.episodes;
        result.phases.push_back(std::move(record));
    }
    result.recommended_arm = survivors.front();
    return result;
}

}  // namespace rtpref
