// Acceptance gate. `acceptance N` runs criterion N; no argument runs all.
// Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "rtpref/design.hpp"
#include "rtpref/diffusion_model.hpp"
#include "rtpref/estimation.hpp"
#include "rtpref/gse.hpp"
#include "rtpref/harness.hpp"
#include "rtpref/instances.hpp"
#include "rtpref/theory.hpp"

using namespace rtpref;
using theory::WeightKind;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

unsigned worker_count() {
    const char* env = std::getenv("RTPREF_THREADS");
    if (env) return static_cast<unsigned>(std::max(1, std::atoi(env)));
    return std::max(1u, std::thread::hardware_concurrency());
}

// Two-sided level of a 4-standard-error normal test.
const double kFourSigmaLevel = std::erfc(4.0 / std::sqrt(2.0));

// Two-sided exact binomial p-value for observing k successes in n trials.
double binomial_two_sided(std::int64_t n, double p, std::int64_t k) {
    auto log_pmf = [&](std::int64_t j) {
        return std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * std::log(p) +
               (n - j) * std::log1p(-p);
    };
    const double cut = log_pmf(k) + 1e-9;
    const auto mode = static_cast<std::int64_t>(std::floor((n + 1) * p));
    double total = 0.0;
    // sum all outcomes no more likely than k; stop once terms are negligible
    for (std::int64_t j = mode; j >= 0; --j) {
        const double l = log_pmf(j);
        if (l <= cut) total += std::exp(l);
        if (j < mode && l < cut - 50.0) break;
    }
    for (std::int64_t j = mode + 1; j <= n; ++j) {
        const double l = log_pmf(j);
        if (l <= cut) total += std::exp(l);
        if (l < cut - 50.0) break;
    }
    return std::min(1.0, total);
}

// 1. Sampler means against exact moments; ratio identity.
Verdict moment_grid() {
    Verdict v;
    const int n = 200000;
    int checks = 0;
    double worst_z = 0.0;
    for (const double a : {0.5, 1.0, 1.5, 2.0}) {
        for (const double u : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0}) {
            const Moments m = moments(u, a);
            const DiffusionParams p(Vector::Constant(1, u), a, 0.0);
            const FirstPassageSampler s(u, a);
            Rng rng(harness::derive_seed(1, {static_cast<std::uint64_t>(a * 100), static_cast<std::uint64_t>(u * 100)}));
            double csum = 0.0, tsum = 0.0;
            for (int i = 0; i < n; ++i) {
                const auto o = sample_outcome(p, u, s, rng);
                csum += o.choice;
                tsum += o.decision_time;
            }
            const double se_c = std::sqrt(m.var_choice / n);
            const double se_t = std::sqrt(m.var_time / n);
            const double zc = se_c > 0 ? std::abs(csum / n - m.mean_choice) / se_c : 0.0;
            const double zt = std::abs(tsum / n - m.mean_time) / se_t;
            worst_z = std::max(worst_z, zt);
            const double minority = std::min(m.p_choice_pos, 1.0 - m.p_choice_pos);
            if (n * minority >= 10.0) {
                worst_z = std::max(worst_z, zc);
                v.require(zc <= 4.0, fmt("choice mean off at a=%g u=%g (z=%.2f)", a, u, zc));
            } else {
                // too few expected minority choices for a normal test: exact binomial at the same level
                const auto k = static_cast<std::int64_t>(std::llround((n - std::abs(csum)) / 2.0));
                const double pv = binomial_two_sided(n, minority, k);
                v.require(pv >= kFourSigmaLevel, fmt("choice count off at a=%g u=%g (k=%g, p=%.3g)", a, u, static_cast<double>(k), pv));
            }
            v.require(zt <= 4.0, fmt("time mean off at a=%g u=%g (z=%.2f)", a, u, zt));
            const double ratio_err = std::abs(m.mean_choice / m.mean_time - u / a);
            v.require(ratio_err < 1e-12, fmt("ratio identity off at a=%g u=%g (%.3g)", a, u, ratio_err));
            checks += 3;
        }
    }
    v.detail = fmt("%g checks, worst normal-test |z| = %.2f", checks, worst_z) + (v.detail.empty() ? "" : "; " + v.detail);
    return v;
}

// 2. Exact spot values.
Verdict spot_values() {
    Verdict v;
    const Moments z = moments(0.0, 1.0);
    v.require(z.p_choice_pos == 0.5, "p(0,1) != 0.5");
    v.require(z.mean_time == 1.0, "E[t](0,1) != 1");
    v.require(z.var_time == 2.0 / 3.0, "V[t](0,1) != 2/3");
    // V[t] = a (tanh(au) - au sech^2(au)) / u^3, written out here
    const double x = 1.0;
    const double sech = 1.0 / std::cosh(x);
    const double reference = (std::tanh(x) - x * sech * sech) / (x * x * x);
    const double got = moments(1.0, 1.0).var_time;
    v.require(std::abs(got - reference) < 1e-4, fmt("V[t](1,1)=%.6f vs %.6f", got, reference));
    v.require(std::abs(got - 0.34162) < 1e-4, fmt("V[t](1,1)=%.6f vs 0.34162", got));
    v.detail = fmt("V[t](1,1) = %.8f", got) + (v.detail.empty() ? "" : "; " + v.detail);
    return v;
}

// 3. Empirical tail frequency under the concentration bounds.
Verdict concentration_coverage() {
    Verdict v;
    const int reps = 2000;
    int configs = 0;
    double worst_slack = 1.0;
    std::string example;
    for (const auto kind : {WeightKind::chdt, WeightKind::ch}) {
        for (const double a : {0.5, 1.0, 1.5}) {
            for (const double u : {0.25, 0.5, 1.0, 2.0}) {
                for (const std::int64_t n : {1000, 10000}) {
                    for (const double eps : {0.05, 0.1, 0.2}) {
                        const auto b = theory::concentration_bound(kind, u, a, n, eps);
                        if (!b.valid || !(b.bound < 1.0)) continue;
                        ++configs;
                        Rng rng(harness::derive_seed(3, {static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(a * 10),
                                                         static_cast<std::uint64_t>(u * 100), static_cast<std::uint64_t>(n),
                                                         static_cast<std::uint64_t>(eps * 100)}));
                        int violations = 0;
                        if (kind == WeightKind::chdt) {
                            const DiffusionParams p(Vector::Constant(1, u), a, 0.0);
                            const FirstPassageSampler s(u, a);
                            for (int r = 0; r < reps; ++r) {
                                std::int64_t sc = 0;
                                double st = 0.0;
                                for (std::int64_t i = 0; i < n; ++i) {
                                    const auto o = sample_outcome(p, u, s, rng);
                                    sc += o.choice;
                                    st += o.decision_time;
                                }
                                violations += std::abs(estimate_single_chdt(n, sc, st) - u / a) > eps;
                            }
                        } else {
                            std::binomial_distribution<std::int64_t> binom(n, moments(u, a).p_choice_pos);
                            for (int r = 0; r < reps; ++r) {
                                violations += std::abs(estimate_single_ch_logit(n, binom(rng)) - 2.0 * a * u) > eps;
                            }
                        }
                        const double freq = static_cast<double>(violations) / reps;
                        worst_slack = std::min(worst_slack, b.bound - freq);
                        if (example.empty() && kind == WeightKind::chdt && u == 1.0 && a == 1.0 && n == 10000 && eps == 0.1) {
                            example = fmt("chdt u=1 a=1 n=1e4 eps=0.1: freq %.4f <= bound %.4f", freq, b.bound);
                        }
                        v.require(freq <= b.bound,
                                  std::string(theory::to_string(kind)) +
                                      fmt(" u=%g a=%g n=%g eps=%g", u, a, static_cast<double>(n), eps) +
                                      fmt(": freq %.4f > bound %.4f", freq, b.bound));
                    }
                }
            }
        }
    }
    v.require(configs > 0, "no valid configuration");
    v.detail = fmt("%g valid configs, min slack %.4f; ", configs, worst_slack) + example +
               (v.detail.empty() ? "" : "; " + v.detail);
    return v;
}

// 4. Monte Carlo variance of the choice-decision-time estimator along random directions.
Verdict asymptotic_variance() {
    Verdict v;
    SphereOptions opts;
    Rng gen(harness::derive_seed(4, {0}));
    const auto inst = gen_sphere_instance(opts, gen);
    const auto queries = inst.query_vectors();
    const SamplerBank bank(inst.params, queries);
    const Vector target = inst.params.theta_star / inst.params.barrier_a;
    std::vector<Vector> dirs;
    std::normal_distribution<double> normal;
    for (int k = 0; k < 5; ++k) {
        Vector y(inst.dimension());
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = normal(gen);
        dirs.push_back(y);
    }
    const std::int64_t n = 10000;
    const int reps = 500;
    std::vector<std::vector<double>> proj(dirs.size());
    std::vector<Vector> estimates(reps);
    harness::parallel_for(reps, worker_count(), [&](std::size_t r) {
        Rng rng(harness::derive_seed(4, {1, r}));
        QueryDataset data;
        for (std::size_t q = 0; q < queries.size(); ++q) {
            QueryStats s;
            s.query_id = q;
            s.x = queries[q];
            s.n = n;
            for (std::int64_t i = 0; i < n; ++i) {
                const auto o = bank.draw(q, rng);
                s.n_pos += o.choice > 0;
                s.sum_decision_time += o.decision_time;
                s.sum_response_time += o.response_time;
            }
            s.sum_choice = 2 * s.n_pos - n;
            data.add_stats(std::move(s));
        }
        estimates[r] = estimate_chdt(data).theta_hat;
    });
    std::string parts;
    for (std::size_t k = 0; k < dirs.size(); ++k) {
        std::vector<double> vals;
        for (const auto& e : estimates) vals.push_back(std::sqrt(static_cast<double>(n)) * dirs[k].dot(e - target));
        const double var = oracle::mean_var(vals).var;
        const double bound = theory::asymptotic_variance_bound(dirs[k], queries, inst.params);
        parts += (k ? " " : "") + fmt("%.4g/%.4g", var, bound);
        v.require(var <= 1.15 * bound, fmt("direction %g: variance %.4g > 1.15 x %.4g", static_cast<double>(k), var, bound));
    }
    v.detail = "variance/bound per direction: " + parts + (v.detail.empty() ? "" : "; " + v.detail);
    return v;
}

// 5. Weight-curve orderings.
Verdict weight_patterns() {
    Verdict v;
    for (const double u : {0.0, 0.5, 1.0, 2.0, 3.0}) {
        v.require(theory::weight_asym(WeightKind::chdt, u, 1.5) > theory::weight_asym(WeightKind::chdt, u, 0.5),
                  fmt("chdt asym weight does not rise with a at u=%g", u));
    }
    v.require(theory::weight_asym(WeightKind::ch, 0.0, 1.5) > theory::weight_asym(WeightKind::ch, 0.0, 0.5),
              "ch asym weight does not rise at u=0");
    v.require(theory::weight_asym(WeightKind::ch, 3.0, 1.5) < theory::weight_asym(WeightKind::ch, 3.0, 0.5),
              "ch asym weight does not fall at u=3");
    int changes = 0;
    double prev = 0.0, crossing = 0.0;
    for (int i = 1; i <= 80; ++i) {
        const double u = 0.05 * i;
        const double diff = theory::weight_nonasym(WeightKind::chdt, u, 1.5) - theory::weight_nonasym(WeightKind::ch, u, 1.5);
        if (i == 1) v.require(diff < 0.0, "chdt non-asym weight not below ch for the hardest query");
        if (i > 1 && (diff > 0.0) != (prev > 0.0)) {
            ++changes;
            crossing = u;
        }
        prev = diff;
    }
    v.require(changes == 1, fmt("%g sign changes in the non-asym weight difference", changes));
    v.require(prev > 0.0, "chdt non-asym weight not above ch for easy queries");
    v.detail = fmt("non-asym crossover near u=%.2f", crossing) + (v.detail.empty() ? "" : "; " + v.detail);
    return v;
}

// 6. Design optimality against a simplex grid.
Verdict design_optimality() {
    Verdict v;
    Rng rng(harness::derive_seed(6, {0}));
    std::normal_distribution<double> normal;
    double worst = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    const int problems = 50;
    for (int rep = 0; rep < problems; ++rep) {
        std::vector<Vector> arms, queries;
        for (int i = 0; i < 3; ++i) {
            Vector z(2), x(2);
            z << normal(rng), normal(rng);
            x << normal(rng), normal(rng);
            arms.push_back(z);
            queries.push_back(x);
        }
        const Vector ones = Vector::Ones(3);
        const double grid = oracle::grid_minimum_3(arms, queries, ones, 0.01);
        const auto w = compute_design(DesignKind::transductive, arms, queries);
        const double got = oracle::design_objective(arms, queries, ones, w.weights);
        worst = std::max(worst, got / grid);
        v.require(got <= 1.01 * grid, fmt("problem %g: ratio %.5f", rep, got / grid));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.require(secs < 10.0, fmt("took %.1f s", secs));
    v.detail = fmt("%g toy problems, worst ratio %.5f, %.2f s", problems, worst, secs) + (v.detail.empty() ? "" : "; " + v.detail);
    return v;
}

harness::SweepConfig estimation_grid_config() {
    harness::SweepConfig c;
    c.mode = harness::Mode::estimation;
    c.master_seed = 2024;
    c.replications = 200;
    c.samples = 50;
    harness::SphereGrid g;
    g.count = 10;
    g.scales = {0.25, 0.5, 1.0, 2.0, 4.0};
    g.barriers = {0.5, 1.0, 1.5};
    c.sphere = g;
    c.variations = {{"trans_chdt", DesignKind::transductive, EstimatorKind::chdt, {}, {}, {}},
                    {"trans_ch", DesignKind::transductive, EstimatorKind::ch_mle, {}, {}, {}},
                    {"hard_ch", DesignKind::hard, EstimatorKind::ch_mle, {}, {}, {}}};
    return c;
}

// 7. Estimation-only benchmark over (c_Z, a).
Verdict estimation_grid() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const auto c = estimation_grid_config();
    const auto instances = harness::expand_instances(c);
    const auto result = harness::run_sweep(c, instances, worker_count());
    v.require(result.replication_errors() == 0, fmt("%g replication errors", static_cast<double>(result.replication_errors())));
    // pooled error and per-replication outcomes keyed by (variation, c_Z, a)
    std::map<std::tuple<std::string, double, double>, std::vector<int>> pooled;
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const auto& r = result.rows[i];
        auto& dst = pooled[{r.variation, r.scale, r.barrier_a}];
        dst.insert(dst.end(), result.outcomes[i].begin(), result.outcomes[i].end());
    }
    auto error = [&](const std::string& var, double s, double a) {
        const auto& o = pooled.at({var, s, a});
        return static_cast<double>(std::count(o.begin(), o.end(), 0)) / static_cast<double>(o.size());
    };
    std::string table;
    for (const double s : c.sphere->scales) {
        table += fmt(" cZ=%g:", s);
        double prev = 1.0;
        for (const double a : c.sphere->barriers) {
            const double e = error("trans_chdt", s, a);
            table += fmt(" %.3f", e);
            v.require(e <= prev + 0.02, fmt("trans_chdt error rises with a at cZ=%g a=%g (%.3f > %.3f + 0.02)", s, a, e, prev));
            prev = e;
        }
    }
    std::string boot;
    for (const double s : {2.0, 4.0}) {
        const auto& x = pooled.at({"trans_chdt", s, 1.5});
        const auto& y = pooled.at({"trans_ch", s, 1.5});
        const std::size_t n = x.size();
        std::vector<double> diff(n);
        for (std::size_t i = 0; i < n; ++i) diff[i] = (x[i] == 0) - (y[i] == 0);
        const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
        Rng rng(harness::derive_seed(7, {static_cast<std::uint64_t>(s)}));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<double> means(4000);
        for (auto& m : means) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += diff[pick(rng)];
            m = acc / static_cast<double>(n);
        }
        std::sort(means.begin(), means.end());
        const double lo = means[static_cast<std::size_t>(0.025 * means.size())];
        const double hi = means[static_cast<std::size_t>(0.975 * means.size()) - 1];
        boot += fmt(" cZ=%g: chdt-ch = %.4f [%.4f, %.4f]", s, mean, lo, hi);
        v.require(mean < 0.0 && hi < 0.0, fmt("cZ=%g: paired interval [%.4f, %.4f] does not exclude 0 below", s, lo, hi));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.require(secs < 900.0, fmt("took %.0f s", secs));
    v.detail = "trans_chdt error over a=0.5,1,1.5 per c_Z:" + table + ";" + boot + fmt("; %.0f s", secs) +
               (v.detail.empty() ? "" : "; " + v.detail);
    return v;
}

// 8. Budgeted GSE medians.
Verdict budgeted_gse() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    harness::SweepConfig c;
    c.mode = harness::Mode::bandit;
    c.master_seed = 2024;
    c.replications = 200;
    c.eta = 2;
    c.a_prior = 1.5;
    harness::SphereGrid g;
    g.count = 10;
    g.scales = {2.0};
    g.barriers = {1.5};
    g.t_nondec = 0.5;
    c.sphere = g;
    c.budgets = {50.0, 100.0, 200.0};
    c.variations = {{"trans_chdt", DesignKind::transductive, EstimatorKind::chdt, {}, {}, {}},
                    {"trans_ch", DesignKind::transductive, EstimatorKind::ch_mle, {}, {}, {}},
                    {"hard_ch", DesignKind::hard, EstimatorKind::ch_mle, {}, {}, {}},
                    {"trans_chdt_rt", DesignKind::transductive, EstimatorKind::chdt_rt, {}, {}, {}}};
    const auto result = harness::run_sweep(c, harness::expand_instances(c), worker_count());
    v.require(result.replication_errors() == 0, fmt("%g replication errors", static_cast<double>(result.replication_errors())));
    const auto summary = harness::aggregate_error(result.rows, {"variation", "budget"});
    std::map<std::pair<std::string, double>, double> median;
    for (const auto& s : summary) median[{s.keys[0], std::stod(s.keys[1])}] = s.median;
    std::string table;
    for (const double b : c.budgets) {
        const double dt = median.at({"trans_chdt", b});
        const double ch = median.at({"trans_ch", b});
        const double hard = median.at({"hard_ch", b});
        const double rt = median.at({"trans_chdt_rt", b});
        table += fmt(" B=%g: chdt %.3f ch %.3f hard %.3f", b, dt, ch, hard) + fmt(" rt %.3f;", rt);
        v.require(dt <= ch, fmt("B=%g: median chdt %.3f > ch %.3f", b, dt, ch));
        v.require(std::abs(rt - dt) <= 0.03, fmt("B=%g: |rt - chdt| = %.3f > 0.03", b, std::abs(rt - dt)));
        if (b == c.budgets.back()) {
            v.require(dt <= hard && ch <= hard, fmt("B=%g: hard_ch %.3f below chdt %.3f or ch %.3f", b, hard, dt, ch));
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.require(secs < 1800.0, fmt("took %.0f s", secs));
    v.detail = "median error:" + table + fmt(" %.0f s", secs) + (v.detail.empty() ? "" : "; " + v.detail);
    return v;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// 9. Byte-identical sweep output.
Verdict determinism() {
    Verdict v;
    const auto base = std::filesystem::temp_directory_path() / "rtpref_acceptance_determinism";
    std::filesystem::remove_all(base);
    harness::SweepConfig bandit;
    bandit.master_seed = 99;
    bandit.replications = 20;
    harness::SphereGrid g;
    g.count = 3;
    g.scales = {1.0, 2.0};
    g.barriers = {1.0};
    g.t_nondec = 0.3;
    bandit.sphere = g;
    bandit.budgets = {20.0, 40.0};
    bandit.variations = {{"trans_chdt", DesignKind::transductive, EstimatorKind::chdt, {}, {}, {}},
                         {"hard_ch", DesignKind::hard, EstimatorKind::ch_mle, {}, {}, {}}};
    auto estimation = estimation_grid_config();
    estimation.replications = 20;
    estimation.sphere->count = 2;
    int files = 0;
    for (const auto* c : {&bandit, &estimation}) {
        const auto instances = harness::expand_instances(*c);
        const auto d1 = base / ("a" + std::to_string(files));
        const auto d2 = base / ("b" + std::to_string(files));
        harness::write_outputs(*c, harness::run_sweep(*c, instances, 1), d1);
        harness::write_outputs(*c, harness::run_sweep(*c, instances, std::max(2u, worker_count())), d2);
        for (const char* f : {"results.csv", "summary.csv"}) {
            const auto a = slurp(d1 / f);
            v.require(!a.empty() && a == slurp(d2 / f), std::string(f) + " differs");
            ++files;
        }
    }
    std::filesystem::remove_all(base);
    v.detail = fmt("%g CSV files compared across two executions", files) + (v.detail.empty() ? "" : "; " + v.detail);
    return v;
}

// 10. Deterministic sign-of-utility feedback.
Verdict noiseless_oracle() {
    Verdict v;
    SphereOptions opts;
    Rng gen(harness::derive_seed(10, {0}));
    const auto inst = gen_sphere_instance(opts, gen);
    GseConfig cfg;
    cfg.budget = 2000.0;
    cfg.eta = 2;
    cfg.buffer = default_buffer(inst.params.t_nondec);
    cfg.design_kind = DesignKind::transductive;
    cfg.estimator_kind = EstimatorKind::chdt;
    DesignCache cache;
    int wrong = 0;
    std::string phases;
    for (int run = 0; run < 50; ++run) {
        NoiselessFeedback fb(inst.params, 0.1);
        Rng rng(harness::derive_seed(10, {1, static_cast<std::uint64_t>(run)}));
        const auto r = run_gse(inst, cfg, fb, rng, &cache);
        if (r.recommended_arm != inst.best_arm) {
            ++wrong;
            // phase in which the best arm was dropped
            for (const auto& p : r.phases) {
                if (std::find(p.survivors.begin(), p.survivors.end(), inst.best_arm) == p.survivors.end()) {
                    phases += (phases.empty() ? "" : ",") + std::to_string(p.phase);
                    break;
                }
            }
        }
    }
    v.require(wrong == 0, fmt("%g of 50 runs missed the best arm", wrong) + " (eliminated in phases " + phases + ")");
    // same runs with phase designs limited to queries between survivors; reported only
    int wrong_scoped = 0;
    cfg.query_scope = QueryScope::survivors;
    for (int run = 0; run < 50; ++run) {
        NoiselessFeedback fb(inst.params, 0.1);
        Rng rng(harness::derive_seed(10, {1, static_cast<std::uint64_t>(run)}));
        wrong_scoped += run_gse(inst, cfg, fb, rng, &cache).recommended_arm != inst.best_arm;
    }
    v.detail = fmt("%g/50 correct with the full query set (%g/50 with survivor-only queries)", 50 - wrong,
                   50 - wrong_scoped) +
               (v.detail.empty() ? "" : "; " + v.detail);
    return v;
}

struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "moment correctness", moment_grid},
        {2, "moment spot values", spot_values},
        {3, "concentration coverage", concentration_coverage},
        {4, "asymptotic variance bound", asymptotic_variance},
        {5, "weight-curve patterns", weight_patterns},
        {6, "design optimality", design_optimality},
        {7, "estimation grid ordering", estimation_grid},
        {8, "budgeted GSE ordering", budgeted_gse},
        {9, "sweep determinism", determinism},
        {10, "noiseless oracle", noiseless_oracle},
    };
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
    bool ok = true;
    for (const auto& c : all) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %2d %s (%.1f s): %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, secs, v.detail.c_str());
        std::fflush(stdout);
        ok = ok && v.pass;
    }
    return ok ? 0 : 1;
}
