#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ewmiv/errors.hpp"
#include "ewmiv/experiments.hpp"
#include "helpers.hpp"

using namespace ewmiv;

namespace {

TextConfig pipeline_config(const std::string& mte_kind) {
    TextConfig cfg;
    testutil::canonical_dgp().to_config(cfg);
    cfg.set("propensity", "kind", "oracle");
    cfg.set("mte", "kind", mte_kind);
    cfg.set("policy", "class", "les");
    cfg.set("policy", "features", "z1");
    cfg.set("policy", "backend", "enumerate");
    cfg.set("pair.median", "alpha0", "identity");
    cfg.set("pair.median", "alpha1", "cap_subsidy(2.5)");
    cfg.set("cost", "kind", "manipulation_gap");
    cfg.set_num("cost", "kappa", 0.3);
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("experiments");

TEST_CASE("experiment configuration parsing") {
    const TextConfig raw = pipeline_config("polynomial");
    const ExperimentConfig config = ExperimentConfig::parse(raw);
    REQUIRE(config.dgp.has_value());
    REQUIRE(config.pairs.size() == 1);
    CHECK(config.pairs[0].name == "median");
    CHECK(config.pairs[0].pair.alpha1 == Manipulation::parse("cap_subsidy(2.5)"));
    CHECK(config.policy_class() == PolicyClass::Les);
    CHECK(config.kappa() == doctest::Approx(0.3));

    const ExperimentConfig broken = ExperimentConfig::parse(TextConfig::parse_string(
        "[propensity]\nkind = logit\n"));
    const Sample s = sample_dgp(testutil::canonical_dgp(), 100, 1);
    CHECK_THROWS_AS(run_pipeline(broken, s), ConfigError);
}

TEST_CASE("pipeline reports, policies and grids") {
    const ExperimentConfig config = ExperimentConfig::parse(pipeline_config("oracle"));
    const Sample s = sample_dgp(testutil::canonical_dgp(), 4000, 55);
    const PipelineResult result = run_pipeline(config, s);

    // fewm, bewm, encourage_all for the single pair.
    REQUIRE(result.rows.size() == 3);
    CHECK(result.policies.size() == 2);
    REQUIRE(result.grids.size() == 2);
    CHECK(result.grids[0].cells.size() == 41u * 41u);

    double fewm_gain = 0.0, all_gain = 0.0;
    for (const auto& row : result.rows) {
        if (row.report.prte_defined) {
            REQUIRE(std::abs(row.report.welfare_gain -
                             row.report.avg_takeup_change * row.report.prte) < 1e-12);
        }
        if (row.policy_name == "fewm") fewm_gain = row.report.welfare_gain;
        if (row.policy_name == "encourage_all") all_gain = row.report.welfare_gain;
    }
    // The learned rule dominates blanket encouragement in sample.
    CHECK(fewm_gain >= all_gain - 1e-12);

    // Budgeted row respects the cap.
    for (const auto& [stem, policy] : result.policies) {
        if (stem.find("bewm") != std::string::npos && !policy.is_empty()) {
            CHECK(policy.attained_budget <= 0.3 + 1e-12);
        }
    }
}

TEST_CASE("identical arms zero out every report row") {
    TextConfig raw = pipeline_config("oracle");
    raw.set("pair.median", "alpha0", "cap_subsidy(2.5)");  // same as alpha1
    const ExperimentConfig config = ExperimentConfig::parse(raw);
    const Sample s = sample_dgp(testutil::canonical_dgp(), 1500, 57);
    const PipelineResult result = run_pipeline(config, s);
    for (const auto& row : result.rows) {
        CHECK(row.report.welfare_gain == 0.0);
        CHECK(row.report.avg_takeup_change == 0.0);
    }
}

TEST_CASE("pipeline welfare gains match oracle evaluation of the learned rules") {
    const ExperimentConfig config = ExperimentConfig::parse(pipeline_config("oracle"));
    const StructuralDgp dgp = testutil::canonical_dgp();
    const Sample s = sample_dgp(dgp, 20000, 59);
    const PipelineResult result = run_pipeline(config, s);

    for (const auto& [stem, policy] : result.policies) {
        if (policy.is_empty()) continue;
        const OracleEvaluator eval(dgp, policy.pair, ColumnSelector::parse({"z1"}), 400000,
                                   61);
        const double truth = eval.contrast(policy);
        double gain = 0.0;
        for (const auto& row : result.rows) {
            const std::string name = "policy_" + row.pair_name + "_" + row.policy_name;
            if (name == stem) gain = row.report.welfare_gain;
        }
        // In-sample estimate vs population value of the same rule: within a
        // few sampling standard errors (gain entries are bounded by ~1).
        CHECK(std::abs(gain - truth) <= 3.0 * 0.4 / std::sqrt(static_cast<double>(s.n())));
    }
}

TEST_CASE("partially linear pipeline works for interior manipulations") {
    TextConfig raw = pipeline_config("partially_linear");
    raw.set("mte", "bandwidth", "0.06");
    // Pinning the instrument to fixed levels keeps both manipulated
    // propensities strictly inside the observed support.
    raw.set("pair.median", "alpha0", "set_to(2.0)");
    raw.set("pair.median", "alpha1", "set_to(1.2)");
    const ExperimentConfig config = ExperimentConfig::parse(raw);
    const Sample s = sample_dgp(testutil::canonical_dgp(), 3000, 63);
    const PipelineResult result = run_pipeline(config, s);
    REQUIRE(result.rows.size() == 3);
    for (const auto& row : result.rows) {
        if (row.report.prte_defined) {
            REQUIRE(std::abs(row.report.welfare_gain -
                             row.report.avg_takeup_change * row.report.prte) < 1e-12);
        }
    }
}

TEST_CASE("pipeline outputs are byte-identical across runs") {
    const ExperimentConfig config = ExperimentConfig::parse(pipeline_config("polynomial"));
    const Sample s = sample_dgp(testutil::canonical_dgp(), 1200, 65);
    const PipelineResult a = run_pipeline(config, s);
    const PipelineResult b = run_pipeline(config, s);
    write_pipeline_outputs(a, "test_out_a");
    write_pipeline_outputs(b, "test_out_b");
    CHECK(slurp("test_out_a/report.csv") == slurp("test_out_b/report.csv"));
    CHECK(slurp("test_out_a/report.json") == slurp("test_out_b/report.json"));
    CHECK(slurp("test_out_a/grid_takeup_median.csv") ==
          slurp("test_out_b/grid_takeup_median.csv"));
    CHECK(!slurp("test_out_a/report.csv").empty());
    std::filesystem::remove_all("test_out_a");
    std::filesystem::remove_all("test_out_b");
}

TEST_CASE("threshold reference rules cover both orientations") {
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(100, 0.0, 4.0);
    const auto thetas = threshold_reference_rules(v, 50);
    CHECK(thetas.size() == 100);
    int up = 0, down = 0;
    for (const auto& theta : thetas) {
        REQUIRE(theta.size() == 2);
        if (theta(1) > 0) ++up;
        if (theta(1) < 0) ++down;
    }
    CHECK(up == 50);
    CHECK(down == 50);
}

TEST_CASE("monte carlo harness") {
    TextConfig cfg;
    testutil::canonical_dgp().to_config(cfg);
    cfg.set("policy", "features", "z1");
    cfg.set("pair.a", "alpha0", "identity");
    cfg.set("pair.a", "alpha1", "cap_subsidy(2.5)");
    cfg.set("cost", "kind", "manipulation_gap");
    cfg.set("montecarlo", "learner", "fewm");
    cfg.set("montecarlo", "n_grid", "200, 1200");
    cfg.set_num("montecarlo", "replications", 24);
    cfg.set_num("montecarlo", "seed", 5);
    cfg.set_num("montecarlo", "eval_draws", 50000);
    cfg.set_num("montecarlo", "reference_rules", 300);
    cfg.set_num("montecarlo", "threads", 2);
    cfg.set("montecarlo", "oracle_nuisances", "true");

    SUBCASE("oracle-nuisance regret decreases with n and never fails") {
        const RegretCurve curve = run_montecarlo(ExperimentConfig::parse(cfg));
        REQUIRE(curve.points.size() == 2);
        CHECK(curve.points[0].failures == 0);
        CHECK(curve.points[1].failures == 0);
        CHECK(curve.points[0].mean_regret >= 0.0);
        CHECK(curve.points[1].mean_regret >= 0.0);
        // Strictly lower at the larger n, by more than a 95% margin.
        const double margin = 1.64 * std::sqrt(curve.points[0].se_regret *
                                                   curve.points[0].se_regret +
                                               curve.points[1].se_regret *
                                                   curve.points[1].se_regret);
        CHECK(curve.points[0].mean_regret - curve.points[1].mean_regret > margin);
    }

    SUBCASE("an unconstrained budget reproduces the unconstrained curve") {
        TextConfig bewm_cfg = cfg;
        bewm_cfg.set("montecarlo", "learner", "bewm");
        // no [cost] kappa -> infinite cap
        const RegretCurve fewm = run_montecarlo(ExperimentConfig::parse(cfg));
        const RegretCurve bewm = run_montecarlo(ExperimentConfig::parse(bewm_cfg));
        REQUIRE(fewm.points.size() == bewm.points.size());
        for (std::size_t i = 0; i < fewm.points.size(); ++i) {
            CHECK(fewm.points[i].mean_regret == bewm.points[i].mean_regret);
            CHECK(fewm.points[i].se_regret == bewm.points[i].se_regret);
        }
    }

    SUBCASE("regret outputs are written and byte-stable") {
        const RegretCurve curve = run_montecarlo(ExperimentConfig::parse(cfg));
        write_regret_outputs(curve, "test_out_mc");
        const std::string first = slurp("test_out_mc/regret_curve.csv");
        write_regret_outputs(curve, "test_out_mc");
        CHECK(slurp("test_out_mc/regret_curve.csv") == first);
        CHECK(first.find("mean_regret") != std::string::npos);
        std::filesystem::remove_all("test_out_mc");
    }

    SUBCASE("unknown learners are rejected") {
        TextConfig bad = cfg;
        bad.set("montecarlo", "learner", "forest");
        CHECK_THROWS_AS(run_montecarlo(ExperimentConfig::parse(bad)), ConfigError);
    }
}

TEST_CASE("plug-in and doubly robust learners land on comparable policies") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    ManipulationPair pair;
    pair.alpha1 = Manipulation::parse("cap_subsidy(2.5)");
    const Sample s = sample_dgp(dgp, 4000, 71);
    const ColumnSelector features = ColumnSelector::parse({"z1"});

    // Plug-in gains with oracle nuisances.
    const OraclePropensity p(dgp);
    const OracleMte mte(dgp);
    CostSpec cost;
    const GainVector gains = build_gains(s, p, mte, pair, cost, features);
    const PolicySpec plug_in = solve_fewm(gains, PolicyClass::Les, Backend::Enumerate);

    // Doubly robust scores with oracle conditional mean and a fitted
    // kernel density ratio (the closed-form ratio does not exist for this
    // manipulation).
    DrNuisanceConfig cfg;
    cfg.oracle_dgp = &dgp;
    cfg.oracle_nuisances = true;
    cfg.fold_seed = 73;
    const DrScoreSet scores = dr_scores(s, 5, pair, cfg, DrGSource::KernelRatio);
    const PolicySpec dr = solve_dr_ewm(scores, features.matrix(s.x, s.z), features.names(),
                                       pair, PolicyClass::Les, Backend::Enumerate);

    // Evaluate both on the true process at a resolution where the Monte
    // Carlo error is the natural yardstick.
    const auto w_plug =
        oracle_welfare(dgp, pair, plug_in.assign_fn(), WelfareMethod::Formula, 10000, 75);
    const auto w_dr =
        oracle_welfare(dgp, pair, dr.assign_fn(), WelfareMethod::Formula, 10000, 75);
    const double tol = 2.0 * std::max(w_plug.se, w_dr.se);
    CHECK(std::abs(w_plug.value - w_dr.value) <= tol);
}

TEST_SUITE_END();
