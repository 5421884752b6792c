// Command-line front end: moments, sampling, estimation, designs, single GSE
// runs, sweeps, weight curves and instance generation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rtpref/dataset_io.hpp"
#include "rtpref/design.hpp"
#include "rtpref/diffusion_model.hpp"
#include "rtpref/estimation.hpp"
#include "rtpref/gse.hpp"
#include "rtpref/harness.hpp"
#include "rtpref/instances.hpp"
#include "rtpref/svg.hpp"
#include "rtpref/theory.hpp"

using namespace rtpref;

namespace {

Vector parse_vector_arg(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidArgument("cannot parse '" + item + "' as a number");
        }
    }
    if (v.empty()) throw InvalidArgument("empty vector");
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string join(const Vector& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_real(v(i));
    }
    return out;
}

void write_curves_svg(const std::vector<theory::CurvePoint>& rows,
                      const std::vector<double>& barriers, const std::filesystem::path& dir) {
    std::vector<svg::Series> asym, nonasym;
    for (const double a : barriers) {
        svg::Series chdt{"chdt a=" + format_real(a), {}, {}};
        svg::Series ch{"ch a=" + format_real(a), {}, {}};
        svg::Series chdt_n = chdt, ch_n = ch;
        for (const auto& r : rows) {
            if (r.a != a) continue;
            chdt.x.push_back(r.u);
            chdt.y.push_back(r.m_chdt_asym);
            ch.x.push_back(r.u);
            ch.y.push_back(r.m_ch_asym);
            chdt_n.x.push_back(r.u);
            chdt_n.y.push_back(r.sqrt_m_chdt_nonasym);
            ch_n.x.push_back(r.u);
            ch_n.y.push_back(r.sqrt_m_ch_nonasym);
        }
        asym.push_back(chdt);
        asym.push_back(ch);
        nonasym.push_back(chdt_n);
        nonasym.push_back(ch_n);
    }
    std::ofstream a(dir / "curves_asym.svg");
    svg::line_plot(a, "Asymptotic information weight", "utility difference u", "weight", asym);
    std::ofstream b(dir / "curves_nonasym.svg");
    svg::line_plot(b, "Square root of concentration weight", "utility difference u",
                   "sqrt(weight)", nonasym);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Response-time preference learning in linear bandits"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::string out_dir = ".";
    app.add_option("--seed", seed, "Random seed (overrides a sweep's master_seed when given)");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", out_dir, "Directory for output files");

    // moments
    auto* cmd_moments = app.add_subcommand("moments", "Exact choice and decision-time moments");
    double m_u = 0.0, m_a = 1.0;
    cmd_moments->add_option("--u", m_u, "Utility difference")->required();
    cmd_moments->add_option("--a", m_a, "Barrier")->required();

    // sample
    auto* cmd_sample = app.add_subcommand("sample", "Draw choices and response times");
    double s_u = 0.0, s_a = 1.0, s_t0 = 0.0;
    std::size_t s_n = 10;
    cmd_sample->add_option("--u", s_u, "Utility difference")->required();
    cmd_sample->add_option("--a", s_a, "Barrier")->required();
    cmd_sample->add_option("--t-nondec", s_t0, "Non-decision time");
    cmd_sample->add_option("-n,--count", s_n, "Number of draws");

    // estimate
    auto* cmd_estimate = app.add_subcommand("estimate", "Estimate the preference vector from a dataset");
    std::string e_csv, e_json, e_kind = "chdt";
    cmd_estimate->add_option("--data", e_csv, "Dataset CSV")->required()->check(CLI::ExistingFile);
    cmd_estimate->add_option("--sidecar", e_json, "Dataset JSON sidecar")->required()->check(CLI::ExistingFile);
    cmd_estimate->add_option("--estimator", e_kind, "chdt | chdt_rt | ch_mle | ch_logit | chdt_logit");

    // design
    auto* cmd_design = app.add_subcommand("design", "Print a design over an instance's queries");
    std::string d_instance, d_kind = "transductive", d_theta;
    cmd_design->add_option("--instance", d_instance, "Instance JSON")->required()->check(CLI::ExistingFile);
    cmd_design->add_option("--kind", d_kind, "transductive | hard");
    cmd_design->add_option("--theta-ref", d_theta, "Reference vector for the hard design (comma separated)");

    // run
    auto* cmd_run = app.add_subcommand("run", "One GSE run; prints the result as JSON");
    std::string r_instance, r_design = "transductive", r_estimator = "chdt", r_feedback = "diffusion",
                r_scope = "all";
    double r_budget = 100.0, r_a_prior = 1.5;
    std::optional<double> r_buffer;
    int r_eta = 2;
    cmd_run->add_option("--instance", r_instance, "Instance JSON")->required()->check(CLI::ExistingFile);
    cmd_run->add_option("--budget", r_budget, "Total response-time budget (s)");
    cmd_run->add_option("--buffer", r_buffer, "Per-phase buffer (s); default a_prior^2 + t_nondec");
    cmd_run->add_option("--a-prior", r_a_prior, "Prior barrier guess for the default buffer");
    cmd_run->add_option("--eta", r_eta, "Elimination parameter");
    cmd_run->add_option("--design", r_design, "transductive | hard");
    cmd_run->add_option("--estimator", r_estimator, "Estimator kind");
    cmd_run->add_option("--feedback", r_feedback, "diffusion | noiseless");
    cmd_run->add_option("--query-scope", r_scope, "all | survivors");

    // sweep
    auto* cmd_sweep = app.add_subcommand("sweep", "Replicated experiments from a JSON config");
    std::string w_config;
    cmd_sweep->add_option("config", w_config, "Sweep config JSON")->required()->check(CLI::ExistingFile);

    // theory curves
    auto* cmd_theory = app.add_subcommand("theory", "Information-weight tables");
    cmd_theory->require_subcommand(1);
    auto* cmd_curves = cmd_theory->add_subcommand("curves", "Weight curves as CSV and SVG");
    std::vector<double> c_barriers{0.5, 1.5};
    double c_min = -4.0, c_max = 4.0, c_step = 0.05;
    cmd_curves->add_option("--barriers", c_barriers, "Barrier values");
    cmd_curves->add_option("--u-min", c_min);
    cmd_curves->add_option("--u-max", c_max);
    cmd_curves->add_option("--step", c_step);

    // gen-instance
    auto* cmd_gen = app.add_subcommand("gen-instance", "Generate a sphere instance file");
    SphereOptions g_opts;
    std::string g_out, g_queries = "all_pairs";
    cmd_gen->add_option("--dimension", g_opts.dimension);
    cmd_gen->add_option("--arms", g_opts.num_arms);
    cmd_gen->add_option("--scale", g_opts.scale, "Arm scale c_Z");
    cmd_gen->add_option("--a", g_opts.barrier_a, "Barrier");
    cmd_gen->add_option("--t-nondec", g_opts.t_nondec);
    cmd_gen->add_option("--queries", g_queries, "all_pairs | reference");
    cmd_gen->add_option("-o,--output", g_out, "Output path (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);
    const bool seed_given = app.count("--seed") > 0;

    try {
        if (*cmd_moments) {
            const Moments m = moments(m_u, m_a);
            std::cout << "p_choice_pos,mean_choice,var_choice,mean_time,var_time\n"
                      << format_real(m.p_choice_pos) << ',' << format_real(m.mean_choice) << ','
                      << format_real(m.var_choice) << ',' << format_real(m.mean_time) << ','
                      << format_real(m.var_time) << '\n';
        } else if (*cmd_sample) {
            const DiffusionParams p(Vector::Constant(1, s_u), s_a, s_t0);
            const FirstPassageSampler sampler(s_u, s_a);
            Rng rng(seed);
            std::cout << "choice,decision_time,response_time\n";
            for (std::size_t i = 0; i < s_n; ++i) {
                const auto o = sample_outcome(p, s_u, sampler, rng);
                std::cout << o.choice << ',' << format_real(o.decision_time) << ','
                          << format_real(o.response_time) << '\n';
            }
        } else if (*cmd_estimate) {
            const auto data = load_dataset(e_csv, e_json);
            const auto est = estimate(parse_estimator_kind(e_kind), data);
            std::cout << "scale," << to_string(est.scale) << "\ntheta_hat," << join(est.theta_hat)
                      << '\n';
        } else if (*cmd_design) {
            const auto inst = load_instance(d_instance);
            const auto kind = parse_design_kind(d_kind);
            std::optional<Vector> ref;
            if (!d_theta.empty()) ref = parse_vector_arg(d_theta);
            const auto w = compute_design(kind, inst.arms, inst.query_vectors(), ref);
            std::cout << "query_id,weight\n";
            for (Eigen::Index i = 0; i < w.weights.size(); ++i) {
                std::cout << i << ',' << format_real(w.weights(i)) << '\n';
            }
        } else if (*cmd_run) {
            const auto inst = load_instance(r_instance);
            GseConfig cfg;
            cfg.budget = r_budget;
            cfg.eta = r_eta;
            cfg.buffer = r_buffer ? *r_buffer : default_buffer(inst.params.t_nondec, r_a_prior);
            cfg.design_kind = parse_design_kind(r_design);
            cfg.estimator_kind = parse_estimator_kind(r_estimator);
            cfg.query_scope = parse_query_scope(r_scope);
            std::unique_ptr<Feedback> fb;
            if (r_feedback == "noiseless") {
                fb = std::make_unique<NoiselessFeedback>(inst.params);
            } else if (r_feedback == "diffusion") {
                fb = std::make_unique<DiffusionFeedback>(inst.params, inst.query_vectors());
            } else {
                throw InvalidArgument("unknown feedback '" + r_feedback + "'");
            }
            Rng rng(seed);
            auto j = run_result_to_json(run_gse(inst, cfg, *fb, rng));
            j["best_arm"] = inst.best_arm;
            j["correct"] = j["recommended_arm"] == inst.best_arm;
            std::cout << j.dump(2) << '\n';
        } else if (*cmd_sweep) {
            auto cfg = harness::load_sweep_config(w_config);
            if (seed_given) cfg.master_seed = seed;
            const auto instances = harness::expand_instances(cfg);
            const auto result = harness::run_sweep(cfg, instances, threads);
            harness::write_outputs(cfg, result, out_dir);
            const auto failures = result.replication_errors();
            std::cerr << result.rows.size() << " rows written to " << out_dir << "; "
                      << failures << " replication errors\n";
            return failures == 0 ? 0 : 3;
        } else if (*cmd_curves) {
            const auto rows = theory::weight_curves(c_barriers, c_min, c_max, c_step);
            std::filesystem::create_directories(out_dir);
            const auto dir = std::filesystem::path(out_dir);
            std::ofstream csv(dir / "curves.csv");
            theory::write_curves_csv(rows, csv);
            write_curves_svg(rows, c_barriers, dir);
            std::cerr << rows.size() << " rows written to " << (dir / "curves.csv").string() << '\n';
        } else if (*cmd_gen) {
            g_opts.query_kind = parse_query_kind(g_queries);
            Rng rng(seed);
            const auto inst = gen_sphere_instance(g_opts, rng);
            if (g_out.empty()) {
                std::cout << instance_to_json(inst).dump(2) << '\n';
            } else {
                save_instance(inst, g_out);
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
