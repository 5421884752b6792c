#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "rtpref/harness.hpp"

using namespace rtpref;
using namespace rtpref::harness;

namespace {

nlohmann::json small_bandit_config() {
    return nlohmann::json::parse(R"({
        "mode": "bandit",
        "master_seed": 42,
        "replications": 4,
        "instances": {"sphere": {"count": 2, "dimension": 3, "arms": 4,
                                 "scales": [1.0], "barriers": [1.0], "t_nondec": 0.2}},
        "variations": [
            {"name": "trans_chdt", "design": "transductive", "estimator": "chdt"},
            {"name": "hard_ch", "design": "hard", "estimator": "ch"}
        ],
        "budgets": [8, 16]
    })");
}

std::string results_text(const SweepConfig& c, const SweepResult& r) {
    std::stringstream out;
    write_results_csv(r.rows, c.mode, out);
    return out.str();
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST(Seeds, DeterministicAndKeySensitive) {
    EXPECT_EQ(derive_seed(1, {2, 3, 4, 5}), derive_seed(1, {2, 3, 4, 5}));
    EXPECT_NE(derive_seed(1, {2, 3, 4, 5}), derive_seed(1, {2, 3, 4, 6}));
    EXPECT_NE(derive_seed(1, {2, 3, 4, 5}), derive_seed(1, {3, 2, 4, 5}));
    EXPECT_NE(derive_seed(1, {2, 3, 4, 5}), derive_seed(2, {2, 3, 4, 5}));
    Rng a = replication_stream(9, 0, 1, 2, 3);
    Rng b = replication_stream(9, 0, 1, 2, 3);
    EXPECT_EQ(a(), b());
}

TEST(Quantiles, LinearInterpolation) {
    const std::vector<double> v{0.1, 0.2, 0.3};
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 0.2);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.25), 0.15);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.75), 0.25);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.0), 0.1);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 0.3);
    EXPECT_THROW(quantile_sorted({}, 0.5), InvalidArgument);
}

TEST(AggregateError, SingleRow) {
    ResultRow r;
    r.variation = "v";
    r.budget = 10.0;
    r.error_probability = 0.37;
    const auto s = aggregate_error({r}, {"variation", "budget"});
    ASSERT_EQ(s.size(), 1u);
    for (const double q : {s[0].min, s[0].q1, s[0].median, s[0].q3, s[0].max, s[0].mean}) {
        EXPECT_EQ(q, 0.37);
    }
}

TEST(AggregateError, GroupsAndQuantiles) {
    std::vector<ResultRow> rows;
    for (const std::string v : {"a", "b"}) {
        for (const double budget : {10.0, 20.0, 40.0}) {
            for (const double e : {0.3, 0.1, 0.2}) {
                ResultRow r;
                r.variation = v;
                r.budget = budget;
                r.error_probability = e;
                rows.push_back(r);
            }
        }
    }
    const auto s = aggregate_error(rows, {"variation", "budget"});
    ASSERT_EQ(s.size(), 6u);
    EXPECT_EQ(s[0].keys, (std::vector<std::string>{"a", format_real(10.0)}));
    EXPECT_DOUBLE_EQ(s[0].median, 0.2);
    EXPECT_DOUBLE_EQ(s[0].q1, 0.15);
    EXPECT_DOUBLE_EQ(s[0].q3, 0.25);
    EXPECT_EQ(s[0].count, 3u);
    EXPECT_THROW(aggregate_error({}, {"variation"}), InvalidArgument);
    EXPECT_THROW(aggregate_error(rows, {"colour"}), InvalidArgument);
}

TEST(AggregateError, AllFailedGroupGetsWarning) {
    ResultRow ok;
    ok.variation = "a";
    ok.error_probability = 0.1;
    ResultRow bad;
    bad.variation = "b";
    bad.error_probability = std::numeric_limits<double>::quiet_NaN();
    const auto s = aggregate_error({ok, bad}, {"variation"});
    ASSERT_EQ(s.size(), 2u);
    EXPECT_TRUE(s[0].warning.empty());
    EXPECT_FALSE(s[1].warning.empty());
    EXPECT_EQ(s[1].count, 0u);
    std::stringstream out;
    write_summary_csv(s, {"variation"}, out);
    EXPECT_NE(out.str().find("no replication succeeded"), std::string::npos);
}

TEST(SweepConfig, ParsesAndRejects) {
    const auto c = parse_sweep_config(small_bandit_config());
    EXPECT_EQ(c.variations.size(), 2u);
    EXPECT_EQ(c.variations[1].estimator, EstimatorKind::ch_mle);
    EXPECT_EQ(c.budgets.size(), 2u);
    ASSERT_TRUE(c.sphere.has_value());
    EXPECT_EQ(c.sphere->arms, 4u);

    auto j = small_bandit_config();
    j["mode"] = "other";
    EXPECT_THROW(parse_sweep_config(j), ParseError);
    j = small_bandit_config();
    j["variations"][1]["name"] = "trans_chdt";
    EXPECT_THROW(parse_sweep_config(j), ParseError);
    j = small_bandit_config();
    j["variations"][0]["estimator"] = "magic";
    EXPECT_THROW(parse_sweep_config(j), ParseError);
    j = small_bandit_config();
    j.erase("budgets");
    EXPECT_THROW(parse_sweep_config(j), ParseError);
    j = small_bandit_config();
    j["replications"] = "many";
    EXPECT_THROW(parse_sweep_config(j), ParseError);
}

TEST(SweepConfig, QueryScope) {
    auto j = small_bandit_config();
    EXPECT_EQ(parse_sweep_config(j).query_scope, QueryScope::all);
    j["query_scope"] = "survivors";
    j["variations"][1]["query_scope"] = "all";
    const auto c = parse_sweep_config(j);
    const auto inst = expand_instances(c).front().instance;
    EXPECT_EQ(gse_config(c, c.variations[0], inst, 10.0).query_scope, QueryScope::survivors);
    EXPECT_EQ(gse_config(c, c.variations[1], inst, 10.0).query_scope, QueryScope::all);
    j["query_scope"] = "some";
    EXPECT_THROW(parse_sweep_config(j), ParseError);
}

TEST(ExpandInstances, SharedUnitArmsAcrossGrid) {
    auto j = small_bandit_config();
    j["instances"]["sphere"]["scales"] = {1.0, 3.0};
    j["instances"]["sphere"]["barriers"] = {0.5, 1.5};
    const auto c = parse_sweep_config(j);
    const auto inst = expand_instances(c);
    ASSERT_EQ(inst.size(), 8u);
    EXPECT_EQ(inst[0].label, inst[3].label);
    EXPECT_LT((inst[0].instance.arms[1] * 3.0 - inst[2].instance.arms[1]).norm(), 1e-12);
    EXPECT_EQ(inst[1].instance.params.barrier_a, 1.5);
    EXPECT_NE(inst[0].instance.arms[0], inst[4].instance.arms[0]);
}

TEST(RunSweep, DeterministicAndThreadIndependent) {
    const auto c = parse_sweep_config(small_bandit_config());
    const auto inst = expand_instances(c);
    const auto a = run_sweep(c, inst, 1);
    const auto b = run_sweep(c, inst, 3);
    EXPECT_EQ(results_text(c, a), results_text(c, b));
    EXPECT_EQ(a.rows.size(), 2u * 2u * 2u);
    for (const auto& r : a.rows) {
        EXPECT_GE(r.error_probability, 0.0);
        EXPECT_LE(r.error_probability, 1.0);
        EXPECT_EQ(r.replications, 4u);
    }
}

TEST(RunSweep, ExtendingReplicationsKeepsPrefix) {
    auto j = small_bandit_config();
    const auto c1 = parse_sweep_config(j);
    j["replications"] = 8;
    const auto c2 = parse_sweep_config(j);
    const auto inst = expand_instances(c1);
    const auto a = run_sweep(c1, inst);
    const auto b = run_sweep(c2, inst);
    ASSERT_EQ(a.outcomes.size(), b.outcomes.size());
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
        ASSERT_EQ(b.outcomes[i].size(), 8u);
        EXPECT_TRUE(std::equal(a.outcomes[i].begin(), a.outcomes[i].end(), b.outcomes[i].begin()));
    }
}

TEST(RunSweep, FailuresCountedPerRow) {
    auto j = small_bandit_config();
    j["budgets"] = {1.0};
    const auto c = parse_sweep_config(j);
    const auto r = run_sweep(c, expand_instances(c));
    EXPECT_EQ(r.replication_errors(), r.rows.size() * 4u);
    EXPECT_TRUE(std::isnan(r.rows[0].error_probability));
    EXPECT_NE(r.rows[0].first_error.find("budget"), std::string::npos);
}

TEST(RunSweep, NoiselessTwoArmFileHasZeroError) {
    BanditInstance inst;
    Vector z0(2), z1(2), theta(2);
    z0 << 1.0, 0.0;
    z1 << 0.0, 1.0;
    theta << 0.3, 0.7;
    inst.arms = {z0, z1};
    inst.queries = build_queries(inst.arms, QueryKind::all_pairs);
    inst.params = DiffusionParams(theta, 1.0, 0.1);
    inst.best_arm = 1;
    const auto path = std::filesystem::temp_directory_path() / "rtpref_two_arms.json";
    save_instance(inst, path.string());
    nlohmann::json j = {{"mode", "bandit"},
                        {"master_seed", 1},
                        {"replications", 1},
                        {"feedback", {{"kind", "noiseless"}, {"decision_time", 0.1}}},
                        {"instances", {{"files", {path.string()}}}},
                        {"variations", {{{"name", "trans_chdt"}}}},
                        {"budgets", {30.0}}};
    const auto c = parse_sweep_config(j);
    const auto r = run_sweep(c, expand_instances(c));
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].error_probability, 0.0);
    EXPECT_EQ(r.replication_errors(), 0u);
    std::filesystem::remove(path);
}

TEST(EstimationMode, EstimatorsShareDataWithinDesign) {
    nlohmann::json j = nlohmann::json::parse(R"({
        "mode": "estimation",
        "master_seed": 5,
        "replications": 30,
        "samples": 50,
        "instances": {"sphere": {"count": 2, "scales": [1.0], "barriers": [1.0]}},
        "variations": [
            {"name": "a", "design": "transductive", "estimator": "chdt"},
            {"name": "b", "design": "hard", "estimator": "ch"},
            {"name": "c", "design": "transductive", "estimator": "chdt"}
        ]
    })");
    const auto c = parse_sweep_config(j);
    const auto r = run_sweep(c, expand_instances(c));
    ASSERT_EQ(r.rows.size(), 6u);
    EXPECT_EQ(r.rows[0].variation, "a");
    EXPECT_EQ(r.rows[1].variation, "b");
    EXPECT_EQ(r.rows[2].variation, "c");
    EXPECT_EQ(r.outcomes[0], r.outcomes[2]);
    EXPECT_EQ(r.rows[0].samples, 50u);
}

TEST(WriteOutputs, FilesAndDeterministicBytes) {
    const auto c = parse_sweep_config(small_bandit_config());
    const auto inst = expand_instances(c);
    const auto dir1 = std::filesystem::temp_directory_path() / "rtpref_out1";
    const auto dir2 = std::filesystem::temp_directory_path() / "rtpref_out2";
    write_outputs(c, run_sweep(c, inst, 2), dir1);
    write_outputs(c, run_sweep(c, inst, 1), dir2);
    for (const char* f : {"results.csv", "summary.csv"}) {
        EXPECT_EQ(slurp(dir1 / f), slurp(dir2 / f)) << f;
    }
    EXPECT_TRUE(std::filesystem::exists(dir1 / "timings.csv"));
    const auto svg = slurp(dir1 / "error_vs_budget.svg");
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("trans_chdt"), std::string::npos);
    std::istringstream summary(slurp(dir1 / "summary.csv"));
    std::string line;
    int lines = 0;
    while (std::getline(summary, line)) ++lines;
    EXPECT_EQ(lines, 1 + 2 * 2);
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

TEST(WriteOutputs, EstimationHeatmaps) {
    nlohmann::json j = nlohmann::json::parse(R"({
        "mode": "estimation", "master_seed": 3, "replications": 5,
        "instances": {"sphere": {"count": 1, "dimension": 3, "arms": 4,
                                 "scales": [0.5, 2.0], "barriers": [0.5, 1.5]}},
        "variations": [{"name": "trans_chdt"}]
    })");
    const auto c = parse_sweep_config(j);
    const auto dir = std::filesystem::temp_directory_path() / "rtpref_out3";
    write_outputs(c, run_sweep(c, expand_instances(c)), dir);
    const auto svg = slurp(dir / "heatmap_trans_chdt.svg");
    EXPECT_NE(svg.find("<rect"), std::string::npos);
    std::filesystem::remove_all(dir);
}
