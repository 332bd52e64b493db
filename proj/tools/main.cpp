// Command-line front end: simulate data from a configured generating
// process, fit nuisance models, learn encouragement rules, evaluate saved
// policies, and run the Monte Carlo regret harness.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ewmiv/dataset.hpp"
#include "ewmiv/errors.hpp"
#include "ewmiv/experiments.hpp"
#include "ewmiv/mte.hpp"
#include "ewmiv/policy.hpp"
#include "ewmiv/propensity.hpp"
#include "ewmiv/structural.hpp"
#include "ewmiv/text_config.hpp"
#include "ewmiv/welfare.hpp"

namespace {

using namespace ewmiv;

struct CommonArgs {
    std::string config_path;
    std::string data_path;
    std::string out_dir = "out";
    long seed = -1;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_data) {
    cmd->add_option("--config", args.config_path, "experiment configuration file")->required();
    auto* data = cmd->add_option("--data", args.data_path, "input data CSV");
    if (needs_data) data->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "seed override");
    cmd->add_option("--threads", args.threads, "worker thread override");
}

TextConfig load_config(const CommonArgs& args) {
    TextConfig cfg = TextConfig::parse_file(args.config_path);
    if (args.seed >= 0) cfg.set_num("montecarlo", "seed", static_cast<double>(args.seed));
    if (args.threads > 0) cfg.set_num("montecarlo", "threads", args.threads);
    return cfg;
}

int cmd_simulate(const CommonArgs& args, long n) {
    const TextConfig cfg = TextConfig::parse_file(args.config_path);
    const StructuralDgp dgp = StructuralDgp::from_config(cfg);
    const std::uint64_t seed = args.seed >= 0 ? static_cast<std::uint64_t>(args.seed)
                                              : static_cast<std::uint64_t>(
                                                    cfg.num_or("simulate", "seed", 1));
    const long rows = n > 0 ? n : static_cast<long>(cfg.num_or("simulate", "n", 1000));

    std::filesystem::create_directories(args.out_dir);
    const Sample sample = sample_dgp(dgp, static_cast<int>(rows), seed);
    write_sample_csv(sample, args.out_dir + "/sample.csv");

    TextConfig echo = cfg;
    echo.set_num("simulate", "n", static_cast<double>(rows));
    echo.set_num("simulate", "seed", static_cast<double>(seed));
    echo.write_file(args.out_dir + "/config_echo.cfg");
    std::cout << "wrote " << rows << " rows to " << args.out_dir << "/sample.csv\n";
    return 0;
}

int cmd_fit(const CommonArgs& args) {
    const ExperimentConfig config = ExperimentConfig::parse(load_config(args));
    const Sample sample = read_sample_csv(args.data_path);
    const PropensityPtr p_model = config.fit_propensity(sample);
    const MtePtr mte_model = config.fit_mte(sample, *p_model);

    std::filesystem::create_directories(args.out_dir);
    TextConfig models;
    p_model->save(models, "model.propensity");
    mte_model->save(models, "model.mte");
    models.write_file(args.out_dir + "/models.cfg");
    config.raw.write_file(args.out_dir + "/config_echo.cfg");

    // Fitted MTE profiles at covariate quartiles, for plotting.
    {
        std::ofstream curve(args.out_dir + "/mte_curve.csv");
        curve << "u,x_cell,value\n";
        const std::array<double, 3> quantiles{0.25, 0.5, 0.75};
        const std::array<const char*, 3> labels{"q25", "q50", "q75"};
        for (std::size_t c = 0; c < quantiles.size(); ++c) {
            Eigen::VectorXd xq(sample.d_x()), zq(sample.d_z());
            auto quantile_of = [&](const Eigen::VectorXd& col) {
                std::vector<double> v(col.data(), col.data() + col.size());
                std::sort(v.begin(), v.end());
                return v[static_cast<std::size_t>(quantiles[c] * (v.size() - 1))];
            };
            for (int j = 0; j < sample.d_x(); ++j) xq(j) = quantile_of(sample.x.col(j));
            for (int j = 0; j < sample.d_z(); ++j) zq(j) = quantile_of(sample.z.col(j));
            const auto range = mte_model->identified_range(xq, zq);
            for (int g = 0; g <= 48; ++g) {
                const double u = range.lo + (range.hi - range.lo) * g / 48.0;
                curve << format_num(u) << "," << labels[c] << ","
                      << format_num(mte_model->eval(u, xq, zq)) << "\n";
            }
        }
    }
    std::cout << "fit " << p_model->kind() << " propensity and " << mte_model->kind()
              << " MTE; wrote " << args.out_dir << "/models.cfg\n";
    for (const auto& w : p_model->warnings()) std::cout << "warning: " << w << "\n";
    return 0;
}

int cmd_learn(const CommonArgs& args) {
    const ExperimentConfig config = ExperimentConfig::parse(load_config(args));
    const Sample sample = read_sample_csv(args.data_path);
    const PipelineResult result = run_pipeline(config, sample);
    write_pipeline_outputs(result, args.out_dir);
    std::cout << "pair,policy,share_eligible,welfare_gain,avg_takeup_change,prte\n";
    for (const auto& row : result.rows) {
        std::cout << row.pair_name << "," << row.policy_name << ","
                  << format_num(row.report.share_eligible) << ","
                  << format_num(row.report.welfare_gain) << ","
                  << format_num(row.report.avg_takeup_change) << ","
                  << (row.report.prte_defined ? format_num(row.report.prte) : "nan") << "\n";
    }
    std::cout << "outputs in " << args.out_dir << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& policy_path) {
    const ExperimentConfig config = ExperimentConfig::parse(load_config(args));
    const Sample sample = read_sample_csv(args.data_path);

    std::ifstream in(policy_path);
    if (!in) throw ConfigError("cannot open policy file: " + policy_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const PolicySpec policy = policy_from_json(ss.str());

    const PropensityPtr p_model = config.fit_propensity(sample);
    const MtePtr mte_model = config.fit_mte(sample, *p_model);
    const CostSpec cost = config.cost_spec(sample);
    const ColumnSelector features = ColumnSelector::parse(policy.feature_names);
    const GainVector gains =
        build_gains(sample, *p_model, *mte_model, policy.pair, cost, features);

    Eigen::VectorXi assign(sample.n());
    for (int i = 0; i < sample.n(); ++i) {
        assign(i) = policy.is_empty() ? 0 : policy.assign_features(gains.v.row(i));
    }
    const WelfareReport report = make_report(gains, assign);

    nlohmann::ordered_json j;
    j["policy_file"] = policy_path;
    j["share_eligible"] = report.share_eligible;
    j["welfare_gain"] = report.welfare_gain;
    j["avg_takeup_change"] = report.avg_takeup_change;
    if (report.prte_defined) j["prte"] = report.prte;

    if (config.dgp) {
        const int draws =
            static_cast<int>(config.raw.num_or("evaluate", "oracle_draws", 200000));
        const std::uint64_t seed =
            static_cast<std::uint64_t>(config.raw.num_or("montecarlo", "seed", 1));
        const auto oracle = oracle_welfare(*config.dgp, policy.pair, policy.assign_fn(),
                                           WelfareMethod::Formula, draws, seed);
        const auto baseline = oracle_welfare(
            *config.dgp, policy.pair,
            [](const Eigen::VectorXd&, const Eigen::VectorXd&) { return 0; },
            WelfareMethod::Formula, draws, seed);
        j["oracle_welfare"] = oracle.value;
        j["oracle_welfare_se"] = oracle.se;
        j["oracle_welfare_gain"] = oracle.value - baseline.value;
    }

    std::filesystem::create_directories(args.out_dir);
    std::ofstream(args.out_dir + "/evaluation.json") << j.dump(2) << "\n";
    config.raw.write_file(args.out_dir + "/config_echo.cfg");
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_montecarlo(const CommonArgs& args) {
    const ExperimentConfig config = ExperimentConfig::parse(load_config(args));
    const RegretCurve curve = run_montecarlo(config);
    write_regret_outputs(curve, args.out_dir);
    std::cout << "learner=" << curve.learner << " loglog_slope="
              << format_num(curve.loglog_slope) << "\n";
    for (const auto& p : curve.points) {
        std::cout << "n=" << p.n << " mean_regret=" << format_num(p.mean_regret)
                  << " se=" << format_num(p.se_regret) << " failures=" << p.failures << "\n";
    }
    std::cout << "outputs in " << args.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Welfare-maximizing encouragement rules from instrumental variables"};
    app.require_subcommand(1);

    CommonArgs sim_args, fit_args, learn_args, eval_args, mc_args;
    long sim_n = 0;
    std::string policy_path;

    auto* sim = app.add_subcommand("simulate", "draw a sample from a configured process");
    add_common(sim, sim_args, false);
    sim->add_option("--n", sim_n, "number of observations");

    auto* fit = app.add_subcommand("fit", "fit propensity and MTE models");
    add_common(fit, fit_args, true);

    auto* learn = app.add_subcommand("learn", "run the full policy-learning pipeline");
    add_common(learn, learn_args, true);

    auto* eval = app.add_subcommand("evaluate", "evaluate a saved policy on data");
    add_common(eval, eval_args, true);
    eval->add_option("--policy", policy_path, "policy JSON file")->required();

    auto* mc = app.add_subcommand("montecarlo", "run the regret harness");
    add_common(mc, mc_args, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(sim_args, sim_n);
        if (fit->parsed()) return cmd_fit(fit_args);
        if (learn->parsed()) return cmd_learn(learn_args);
        if (eval->parsed()) return cmd_evaluate(eval_args, policy_path);
        if (mc->parsed()) return cmd_montecarlo(mc_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
