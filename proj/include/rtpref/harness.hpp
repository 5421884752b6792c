#pragma once

// Replicated experiments over instances x variations x budgets.
//
// Two modes:
//   bandit      full GSE runs under each response-time budget
//   estimation  a fixed number of queries drawn from the design over all
//               arms, then a single estimate; no budget
//
// Every replication owns a random stream derived from
// (master seed, instance, variation, budget index, replication), so results
// do not depend on thread count or on how many replications are requested.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rtpref/core.hpp"
#include "rtpref/design.hpp"
#include "rtpref/estimation.hpp"
#include "rtpref/gse.hpp"
#include "rtpref/instances.hpp"
#include "rtpref/svg.hpp"

namespace rtpref::harness {

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Hash of the master seed and an ordered key tuple.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(master);
    for (const auto k : keys) {
        h = splitmix64(h ^ splitmix64(k + 0x5851f42d4c957f2dULL));
    }
    return h;
}

inline Rng replication_stream(std::uint64_t master, std::size_t instance, std::size_t variation,
                              std::size_t budget_index, std::size_t replication) {
    return Rng(derive_seed(master, {instance, variation, budget_index, replication}));
}

inline constexpr std::uint64_t kInstanceDomain = 0x696e7374616e6365ULL;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Mode { bandit, estimation };
enum class FeedbackKind { diffusion, noiseless };

struct Variation {
    std::string name;
    DesignKind design = DesignKind::transductive;
    EstimatorKind estimator = EstimatorKind::chdt;
    std::optional<int> eta;
    std::optional<double> buffer;
    std::optional<QueryScope> query_scope;
};

struct SphereGrid {
    std::size_t count = 10;
    Eigen::Index dimension = 5;
    std::size_t arms = 10;
    std::vector<double> scales{1.0};
    std::vector<double> barriers{1.0};
    double t_nondec = 0.0;
    QueryKind queries = QueryKind::all_pairs;
};

struct SweepConfig {
    Mode mode = Mode::bandit;
    std::uint64_t master_seed = 0;
    std::size_t replications = 100;
    FeedbackKind feedback = FeedbackKind::diffusion;
    double mock_decision_time = 0.1;
    std::optional<SphereGrid> sphere;
    std::vector<std::string> instance_files;
    std::vector<Variation> variations;
    std::vector<double> budgets;
    int eta = 2;
    std::optional<double> buffer;  // default a_prior^2 + t_nondec
    double a_prior = 1.5;
    QueryScope query_scope = QueryScope::all;
    std::size_t samples = 50;  // estimation mode
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace detail

/// Parses a sweep config; relative instance paths resolve against base_dir.
inline SweepConfig parse_sweep_config(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = {}) {
    using detail::get_or;
    if (!j.is_object()) {
        throw ParseError("config: top level must be an object");
    }
    SweepConfig c;
    auto parse_scope = [](const std::string& v) {
        try {
            return parse_query_scope(v);
        } catch (const InvalidArgument& e) {
            throw ParseError(std::string("config: ") + e.what());
        }
    };
    const auto mode = get_or<std::string>(j, "mode", "bandit");
    if (mode == "bandit") {
        c.mode = Mode::bandit;
    } else if (mode == "estimation") {
        c.mode = Mode::estimation;
    } else {
        throw ParseError("config.mode: expected 'bandit' or 'estimation', got '" + mode + "'");
    }
    c.master_seed = get_or<std::uint64_t>(j, "master_seed", 0);
    c.replications = get_or<std::size_t>(j, "replications", 100);
    c.eta = get_or<int>(j, "eta", 2);
    if (j.contains("buffer") && !j.at("buffer").is_null()) c.buffer = get_or<double>(j, "buffer", 0.0);
    c.a_prior = get_or<double>(j, "a_prior", 1.5);
    c.samples = get_or<std::size_t>(j, "samples", 50);
    c.query_scope = parse_scope(get_or<std::string>(j, "query_scope", "all"));
    c.budgets = get_or<std::vector<double>>(j, "budgets", {});
    if (j.contains("feedback")) {
        const auto& fb = j.at("feedback");
        const auto kind = get_or<std::string>(fb, "kind", "diffusion");
        if (kind == "diffusion") {
            c.feedback = FeedbackKind::diffusion;
        } else if (kind == "noiseless") {
            c.feedback = FeedbackKind::noiseless;
            c.mock_decision_time = get_or<double>(fb, "decision_time", 0.1);
        } else {
            throw ParseError("config.feedback.kind: unknown '" + kind + "'");
        }
    }
    if (!j.contains("instances")) {
        throw ParseError("config: missing 'instances'");
    }
    const auto& inst = j.at("instances");
    if (inst.contains("sphere")) {
        const auto& s = inst.at("sphere");
        SphereGrid g;
        g.count = get_or<std::size_t>(s, "count", g.count);
        g.dimension = get_or<Eigen::Index>(s, "dimension", g.dimension);
        g.arms = get_or<std::size_t>(s, "arms", g.arms);
        g.scales = get_or<std::vector<double>>(s, "scales", g.scales);
        g.barriers = get_or<std::vector<double>>(s, "barriers", g.barriers);
        g.t_nondec = get_or<double>(s, "t_nondec", g.t_nondec);
        try {
            g.queries = parse_query_kind(get_or<std::string>(s, "queries", "all_pairs"));
        } catch (const InvalidArgument& e) {
            throw ParseError(std::string("config.instances.sphere.queries: ") + e.what());
        }
        c.sphere = g;
    }
    for (const auto& f : get_or<std::vector<std::string>>(inst, "files", {})) {
        const std::filesystem::path p(f);
        c.instance_files.push_back(p.is_absolute() ? f : (base_dir / p).string());
    }
    if (!c.sphere && c.instance_files.empty()) {
        throw ParseError("config.instances: need 'sphere' or 'files'");
    }
    if (!j.contains("variations") || !j.at("variations").is_array() ||
        j.at("variations").empty()) {
        throw ParseError("config: 'variations' must be a non-empty array");
    }
    std::set<std::string> names;
    for (const auto& v : j.at("variations")) {
        Variation var;
        try {
            var.design = parse_design_kind(get_or<std::string>(v, "design", "transductive"));
            var.estimator = parse_estimator_kind(get_or<std::string>(v, "estimator", "chdt"));
        } catch (const InvalidArgument& e) {
            throw ParseError(std::string("config.variations: ") + e.what());
        }
        var.name = get_or<std::string>(
            v, "name",
            std::string(to_string(var.design)) + "_" + std::string(to_string(var.estimator)));
        if (v.contains("eta")) var.eta = get_or<int>(v, "eta", 2);
        if (v.contains("buffer")) var.buffer = get_or<double>(v, "buffer", 0.0);
        if (v.contains("query_scope")) var.query_scope = parse_scope(get_or<std::string>(v, "query_scope", "all"));
        if (!names.insert(var.name).second) {
            throw ParseError("config.variations: duplicate name '" + var.name + "'");
        }
        c.variations.push_back(std::move(var));
    }
    if (c.replications == 0) {
        throw ParseError("config.replications must be positive");
    }
    if (c.mode == Mode::bandit && c.budgets.empty()) {
        throw ParseError("config.budgets must be non-empty in bandit mode");
    }
    if (c.mode == Mode::estimation && c.samples == 0) {
        throw ParseError("config.samples must be positive in estimation mode");
    }
    return c;
}

inline SweepConfig load_sweep_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return parse_sweep_config(j, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

struct InstanceEntry {
    std::string label;  // generator index or file name
    BanditInstance instance;
    double scale = 1.0;  // c_Z, or 1 for files
};

/// Expands the instance section. Sphere instance i shares its unit arms
/// across every (scale, barrier) grid point.
inline std::vector<InstanceEntry> expand_instances(const SweepConfig& config) {
    std::vector<InstanceEntry> out;
    if (config.sphere) {
        const auto& g = *config.sphere;
        for (std::size_t i = 0; i < g.count; ++i) {
            for (const double scale : g.scales) {
                for (const double a : g.barriers) {
                    Rng rng(derive_seed(config.master_seed, {kInstanceDomain, i}));
                    SphereOptions opts;
                    opts.dimension = g.dimension;
                    opts.num_arms = g.arms;
                    opts.scale = scale;
                    opts.barrier_a = a;
                    opts.t_nondec = g.t_nondec;
                    opts.query_kind = g.queries;
                    out.push_back({"sphere" + std::to_string(i), gen_sphere_instance(opts, rng), scale});
                }
            }
        }
    }
    for (const auto& f : config.instance_files) {
        out.push_back({std::filesystem::path(f).filename().string(), load_instance(f), 1.0});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct ResultRow {
    std::size_t instance = 0;
    std::string instance_label;
    double scale = 1.0;
    double barrier_a = 1.0;
    double t_nondec = 0.0;
    std::string variation;
    DesignKind design = DesignKind::transductive;
    EstimatorKind estimator = EstimatorKind::chdt;
    int eta = 0;            // bandit mode
    double budget = 0.0;    // bandit mode
    std::size_t samples = 0;  // estimation mode
    std::size_t replications = 0;
    std::size_t wrong = 0;
    std::size_t failed = 0;
    double error_probability = 0.0;  // wrong / (replications - failed); NaN if all failed
    double mean_episodes = 0.0;
    double mean_total_time = 0.0;
    double seconds = 0.0;  // wall clock, written to timings.csv only
    std::string first_error;
};

/// Per-replication outcome: 1 correct, 0 wrong, -1 failed.
using Outcomes = std::vector<int>;

inline std::string field(const ResultRow& r, const std::string& key) {
    if (key == "instance") return std::to_string(r.instance);
    if (key == "variation") return r.variation;
    if (key == "budget") return format_real(r.budget);
    if (key == "scale") return format_real(r.scale);
    if (key == "barrier_a") return format_real(r.barrier_a);
    if (key == "design") return std::string(to_string(r.design));
    if (key == "estimator") return std::string(to_string(r.estimator));
    if (key == "eta") return std::to_string(r.eta);
    if (key == "samples") return std::to_string(r.samples);
    throw InvalidArgument("unknown group key '" + key + "'");
}

inline void finish_row(ResultRow& row, const Outcomes& outcomes, double episodes, double time) {
    row.replications = outcomes.size();
    row.wrong = static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), 0));
    row.failed = static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), -1));
    const std::size_t ok = row.replications - row.failed;
    row.error_probability = ok > 0 ? static_cast<double>(row.wrong) / static_cast<double>(ok)
                                   : std::numeric_limits<double>::quiet_NaN();
    row.mean_episodes = ok > 0 ? episodes / static_cast<double>(ok) : 0.0;
    row.mean_total_time = ok > 0 ? time / static_cast<double>(ok) : 0.0;
}

/// Index of the arm maximising z . theta, lowest index on ties.
inline std::size_t argmax_arm(const std::vector<Vector>& arms, const Vector& theta) {
    std::size_t best = 0;
    double best_v = -kInf;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        const double v = arms[i].dot(theta);
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

/// Shared per-instance state: immutable sampler bank and a design cache.
struct InstanceContext {
    const InstanceEntry* entry = nullptr;
    std::shared_ptr<const SamplerBank> bank;
    std::unique_ptr<DesignCache> cache = std::make_unique<DesignCache>();
};

inline std::unique_ptr<Feedback> make_feedback(const SweepConfig& config, const InstanceContext& ctx) {
    if (config.feedback == FeedbackKind::noiseless) {
        return std::make_unique<NoiselessFeedback>(ctx.entry->instance.params,
                                                   config.mock_decision_time);
    }
    return std::make_unique<DiffusionFeedback>(ctx.bank);
}

inline GseConfig gse_config(const SweepConfig& config, const Variation& v, const BanditInstance& inst,
                            double budget) {
    GseConfig g;
    g.budget = budget;
    g.eta = v.eta.value_or(config.eta);
    g.buffer = v.buffer ? *v.buffer
                        : (config.buffer ? *config.buffer
                                         : default_buffer(inst.params.t_nondec, config.a_prior));
    g.design_kind = v.design;
    g.estimator_kind = v.estimator;
    g.query_scope = v.query_scope.value_or(config.query_scope);
    return g;
}

/// R replications of one GSE variation at one budget.
inline ResultRow run_bandit_cell(const SweepConfig& config, const InstanceContext& ctx,
                                 std::size_t instance_id, std::size_t variation_id,
                                 std::size_t budget_index, Outcomes* outcomes_out = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    const BanditInstance& inst = ctx.entry->instance;
    const Variation& var = config.variations[variation_id];
    const double budget = config.budgets[budget_index];
    const GseConfig gse = gse_config(config, var, inst, budget);
    ResultRow row;
    row.eta = gse.eta;
    row.budget = budget;
    Outcomes outcomes;
    double episodes = 0.0;
    double time = 0.0;
    auto feedback = make_feedback(config, ctx);
    for (std::size_t rep = 0; rep < config.replications; ++rep) {
        Rng rng = replication_stream(config.master_seed, instance_id, variation_id, budget_index, rep);
        try {
            const RunResult r = run_gse(inst, gse, *feedback, rng, ctx.cache.get());
            outcomes.push_back(r.recommended_arm == inst.best_arm ? 1 : 0);
            episodes += static_cast<double>(r.total_episodes);
            time += r.total_time;
        } catch (const Error& e) {
            outcomes.push_back(-1);
            if (row.first_error.empty()) row.first_error = e.what();
        }
    }
    finish_row(row, outcomes, episodes, time);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (outcomes_out) *outcomes_out = std::move(outcomes);
    return row;
}

/// Estimation-mode replications for every variation sharing one design kind.
/// Each replication draws `samples` queries from the design over all arms and
/// feeds the same data to every estimator in the group, so comparisons
/// between estimators are paired. The hard design weights use the true theta*.
inline std::vector<ResultRow> run_estimation_cell(const SweepConfig& config,
                                                  const InstanceContext& ctx,
                                                  std::size_t instance_id, DesignKind design,
                                                  std::vector<Outcomes>* outcomes_out = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    const BanditInstance& inst = ctx.entry->instance;
    std::vector<std::size_t> members;
    for (std::size_t v = 0; v < config.variations.size(); ++v) {
        if (config.variations[v].design == design) members.push_back(v);
    }
    std::vector<ResultRow> rows(members.size());
    std::vector<Outcomes> outcomes(members.size());
    const std::vector<Vector> queries = inst.query_vectors();
    std::string design_error;
    DesignWeights weights;
    try {
        weights = compute_design(design, inst.arms, queries, inst.params.theta_star);
    } catch (const Error& e) {
        design_error = e.what();
    }
    const auto cumulative = design_error.empty() ? cumulative_weights(weights.weights)
                                                 : std::vector<double>{};
    auto feedback = make_feedback(config, ctx);
    const double t_nondec = inst.params.t_nondec;
    const auto design_id = static_cast<std::size_t>(design);
    for (std::size_t rep = 0; rep < config.replications; ++rep) {
        if (!design_error.empty()) {
            for (std::size_t m = 0; m < members.size(); ++m) {
                outcomes[m].push_back(-1);
                if (rows[m].first_error.empty()) rows[m].first_error = design_error;
            }
            continue;
        }
        Rng rng = replication_stream(config.master_seed, instance_id, design_id, 0, rep);
        QueryDataset data;
        QueryDataset data_rt;
        for (std::size_t s = 0; s < config.samples; ++s) {
            const std::size_t qi = sample_index(cumulative, rng);
            QueryOutcome out = feedback->query(qi, queries[qi], rng);
            data_rt.add(qi, queries[qi], out);
            const double dt = out.response_time - t_nondec;
            if (dt > 0.0) out.decision_time = dt;
            data.add(qi, queries[qi], out);
        }
        for (std::size_t m = 0; m < members.size(); ++m) {
            const EstimatorKind kind = config.variations[members[m]].estimator;
            try {
                const auto est = estimate(kind, kind == EstimatorKind::chdt_rt ? data_rt : data);
                outcomes[m].push_back(argmax_arm(inst.arms, est.theta_hat) == inst.best_arm ? 1 : 0);
            } catch (const Error& e) {
                outcomes[m].push_back(-1);
                if (rows[m].first_error.empty()) rows[m].first_error = e.what();
            }
        }
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (std::size_t m = 0; m < members.size(); ++m) {
        rows[m].samples = config.samples;
        finish_row(rows[m], outcomes[m], static_cast<double>(config.samples) *
                                             static_cast<double>(config.replications), 0.0);
        rows[m].seconds = seconds / static_cast<double>(members.size());
    }
    if (outcomes_out) *outcomes_out = std::move(outcomes);
    return rows;
}

/// Runs `tasks` on up to `threads` workers; each task index is executed once.
inline void parallel_for(std::size_t tasks, unsigned threads,
                         const std::function<void(std::size_t)>& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tasks)));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    auto worker = [&](unsigned id) {
        try {
            for (std::size_t i = next++; i < tasks; i = next++) body(i);
        } catch (...) {
            errors[id] = std::current_exception();
        }
    };
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

struct SweepResult {
    std::vector<ResultRow> rows;
    /// Per row, the per-replication outcomes (same order as rows).
    std::vector<Outcomes> outcomes;
    std::size_t replication_errors() const {
        std::size_t n = 0;
        for (const auto& r : rows) n += r.failed;
        return n;
    }
};

inline SweepResult run_sweep(const SweepConfig& config, const std::vector<InstanceEntry>& instances,
                             unsigned threads = 1) {
    std::vector<InstanceContext> contexts(instances.size());
    parallel_for(instances.size(), threads, [&](std::size_t i) {
        contexts[i].entry = &instances[i];
        if (config.feedback == FeedbackKind::diffusion) {
            const auto q = instances[i].instance.query_vectors();
            contexts[i].bank = std::make_shared<const SamplerBank>(instances[i].instance.params, q);
        }
    });
    struct Task {
        std::size_t instance;
        std::size_t variation;  // estimation mode: design kind id
        std::size_t budget;
    };
    std::vector<Task> tasks;
    if (config.mode == Mode::bandit) {
        for (std::size_t i = 0; i < instances.size(); ++i)
            for (std::size_t v = 0; v < config.variations.size(); ++v)
                for (std::size_t b = 0; b < config.budgets.size(); ++b) tasks.push_back({i, v, b});
    } else {
        std::set<std::size_t> designs;
        for (const auto& v : config.variations) designs.insert(static_cast<std::size_t>(v.design));
        for (std::size_t i = 0; i < instances.size(); ++i)
            for (const auto d : designs) tasks.push_back({i, d, 0});
    }
    std::vector<std::vector<ResultRow>> task_rows(tasks.size());
    std::vector<std::vector<Outcomes>> task_outcomes(tasks.size());
    parallel_for(tasks.size(), threads, [&](std::size_t t) {
        const Task& task = tasks[t];
        const auto& ctx = contexts[task.instance];
        if (config.mode == Mode::bandit) {
            Outcomes o;
            ResultRow row = run_bandit_cell(config, ctx, task.instance, task.variation, task.budget, &o);
            row.variation = config.variations[task.variation].name;
            row.design = config.variations[task.variation].design;
            row.estimator = config.variations[task.variation].estimator;
            task_rows[t].push_back(std::move(row));
            task_outcomes[t].push_back(std::move(o));
        } else {
            const auto design = static_cast<DesignKind>(task.variation);
            task_rows[t] = run_estimation_cell(config, ctx, task.instance, design, &task_outcomes[t]);
            std::size_t m = 0;
            for (const auto& v : config.variations) {
                if (v.design != design) continue;
                task_rows[t][m].variation = v.name;
                task_rows[t][m].design = v.design;
                task_rows[t][m].estimator = v.estimator;
                ++m;
            }
        }
        for (auto& row : task_rows[t]) {
            const auto& entry = instances[task.instance];
            row.instance = task.instance;
            row.instance_label = entry.label;
            row.scale = entry.scale;
            row.barrier_a = entry.instance.params.barrier_a;
            row.t_nondec = entry.instance.params.t_nondec;
        }
    });
    // Rows in (instance, variation order in config, budget) order.
    std::map<std::string, std::size_t> variation_rank;
    for (std::size_t v = 0; v < config.variations.size(); ++v) {
        variation_rank[config.variations[v].name] = v;
    }
    std::vector<std::pair<ResultRow, Outcomes>> all;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        for (std::size_t k = 0; k < task_rows[t].size(); ++k) {
            all.emplace_back(std::move(task_rows[t][k]), std::move(task_outcomes[t][k]));
        }
    }
    std::sort(all.begin(), all.end(), [&](const auto& l, const auto& r) {
        const auto& a = l.first;
        const auto& b = r.first;
        if (a.instance != b.instance) return a.instance < b.instance;
        if (a.variation != b.variation) return variation_rank[a.variation] < variation_rank[b.variation];
        return a.budget < b.budget;
    });
    SweepResult result;
    for (auto& [row, o] : all) {
        result.rows.push_back(std::move(row));
        result.outcomes.push_back(std::move(o));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Linear-interpolation quantile of sorted data (position (n - 1) p).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) {
        throw InvalidArgument("quantile of an empty sample");
    }
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct SummaryRow {
    std::vector<std::string> keys;
    std::size_t count = 0;  // rows with a defined error probability
    double mean = 0.0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    std::string warning;
};

/// Error-probability quantiles across rows sharing the group keys, in first-seen order.
/// Rows whose error probability is undefined are skipped; a group left empty
/// yields a row carrying a warning instead of statistics.
inline std::vector<SummaryRow> aggregate_error(const std::vector<ResultRow>& rows,
                                               const std::vector<std::string>& group_keys) {
    if (rows.empty()) {
        throw InvalidArgument("aggregate_error: no rows");
    }
    std::vector<std::vector<std::string>> order;
    std::map<std::vector<std::string>, std::vector<double>> groups;
    for (const auto& r : rows) {
        std::vector<std::string> key;
        for (const auto& k : group_keys) key.push_back(field(r, k));
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        if (!std::isnan(r.error_probability)) it->second.push_back(r.error_probability);
    }
    std::vector<SummaryRow> out;
    for (const auto& key : order) {
        auto values = groups[key];
        SummaryRow s;
        s.keys = key;
        s.count = values.size();
        if (values.empty()) {
            s.warning = "no replication succeeded in this group";
            out.push_back(std::move(s));
            continue;
        }
        std::sort(values.begin(), values.end());
        double total = 0.0;
        for (const double v : values) total += v;
        s.mean = total / static_cast<double>(values.size());
        s.min = values.front();
        s.q1 = quantile_sorted(values, 0.25);
        s.median = quantile_sorted(values, 0.5);
        s.q3 = quantile_sorted(values, 0.75);
        s.max = values.back();
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline void write_results_csv(const std::vector<ResultRow>& rows, Mode mode, std::ostream& out) {
    out << "instance,instance_label,scale,barrier_a,t_nondec,variation,design,estimator,";
    out << (mode == Mode::bandit ? "eta,budget," : "samples,");
    out << "replications,wrong,failed,error_probability,mean_episodes,mean_total_time\n";
    for (const auto& r : rows) {
        out << r.instance << ',' << r.instance_label << ',' << format_real(r.scale) << ','
            << format_real(r.barrier_a) << ',' << format_real(r.t_nondec) << ',' << r.variation
            << ',' << to_string(r.design) << ',' << to_string(r.estimator) << ',';
        if (mode == Mode::bandit) {
            out << r.eta << ',' << format_real(r.budget) << ',';
        } else {
            out << r.samples << ',';
        }
        out << r.replications << ',' << r.wrong << ',' << r.failed << ','
            << format_real(r.error_probability) << ',' << format_real(r.mean_episodes) << ','
            << format_real(r.mean_total_time) << '\n';
    }
}

inline void write_timings_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
    out << "instance,variation,budget,seconds\n";
    for (const auto& r : rows) {
        out << r.instance << ',' << r.variation << ',' << format_real(r.budget) << ','
            << format_real(r.seconds) << '\n';
    }
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows,
                              const std::vector<std::string>& group_keys, std::ostream& out) {
    for (const auto& k : group_keys) out << k << ',';
    out << "count,mean,min,q1,median,q3,max,warning\n";
    for (const auto& s : rows) {
        for (const auto& k : s.keys) out << k << ',';
        out << s.count << ',';
        if (s.warning.empty()) {
            out << format_real(s.mean) << ',' << format_real(s.min) << ',' << format_real(s.q1)
                << ',' << format_real(s.median) << ',' << format_real(s.q3) << ','
                << format_real(s.max) << ",\n";
        } else {
            out << ",,,,,,," << s.warning << '\n';
        }
    }
}

inline std::vector<std::string> summary_keys(Mode mode) {
    return mode == Mode::bandit ? std::vector<std::string>{"variation", "budget"}
                                : std::vector<std::string>{"variation", "scale", "barrier_a"};
}

/// Median error against budget per variation (bandit), or one heatmap of
/// mean error over (c_Z, a) per variation (estimation).
inline std::vector<std::string> write_plots(const SweepConfig& config,
                                            const std::vector<SummaryRow>& summary,
                                            const std::filesystem::path& dir) {
    std::vector<std::string> written;
    if (config.mode == Mode::bandit) {
        std::vector<svg::Series> series;
        for (const auto& v : config.variations) {
            svg::Series s{v.name, {}, {}};
            for (const auto& row : summary) {
                if (row.keys[0] == v.name && row.warning.empty()) {
                    s.x.push_back(std::stod(row.keys[1]));
                    s.y.push_back(row.median);
                }
            }
            series.push_back(std::move(s));
        }
        const auto path = dir / "error_vs_budget.svg";
        std::ofstream out(path);
        svg::line_plot(out, "Median error probability across instances", "budget (s)",
                       "P[recommended != best]", series);
        written.push_back(path.string());
        return written;
    }
    for (const auto& v : config.variations) {
        std::vector<double> xs;
        std::vector<double> ys;
        for (const auto& row : summary) {
            if (row.keys[0] != v.name) continue;
            const double x = std::stod(row.keys[1]);
            const double y = std::stod(row.keys[2]);
            if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
            if (std::find(ys.begin(), ys.end(), y) == ys.end()) ys.push_back(y);
        }
        std::sort(xs.begin(), xs.end());
        std::sort(ys.begin(), ys.end());
        Matrix grid = Matrix::Constant(static_cast<Eigen::Index>(ys.size()),
                                       static_cast<Eigen::Index>(xs.size()),
                                       std::numeric_limits<double>::quiet_NaN());
        for (const auto& row : summary) {
            if (row.keys[0] != v.name || !row.warning.empty()) continue;
            const auto xi = std::find(xs.begin(), xs.end(), std::stod(row.keys[1])) - xs.begin();
            const auto yi = std::find(ys.begin(), ys.end(), std::stod(row.keys[2])) - ys.begin();
            grid(yi, xi) = row.mean;
        }
        const auto path = dir / ("heatmap_" + v.name + ".svg");
        std::ofstream out(path);
        svg::heatmap(out, "Mean error probability: " + v.name, "arm scale c_Z", "barrier a", xs, ys,
                     grid);
        written.push_back(path.string());
    }
    return written;
}

/// Writes results.csv, summary.csv, timings.csv and the plots into `dir`.
inline void write_outputs(const SweepConfig& config, const SweepResult& result,
                          const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "results.csv");
        write_results_csv(result.rows, config.mode, out);
    }
    {
        std::ofstream out(dir / "timings.csv");
        write_timings_csv(result.rows, out);
    }
    const auto keys = summary_keys(config.mode);
    const auto summary = aggregate_error(result.rows, keys);
    {
        std::ofstream out(dir / "summary.csv");
        write_summary_csv(summary, keys, out);
    }
    write_plots(config, summary, dir);
    std::ofstream errors(dir / "errors.txt");
    for (const auto& r : result.rows) {
        if (r.failed > 0) {
            errors << "instance " << r.instance << " variation " << r.variation << " budget "
                   << format_real(r.budget) << ": " << r.failed << " failed; first: "
                   << r.first_error << '\n';
        }
    }
}

}  // namespace rtpref::harness
