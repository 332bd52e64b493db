#include "ewmiv/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "ewmiv/errors.hpp"
#include "ewmiv/random.hpp"

namespace ewmiv {

namespace {

double column_median(const Eigen::VectorXd& col) {
    std::vector<double> v(col.data(), col.data() + col.size());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig ExperimentConfig::parse(const TextConfig& cfg) {
    ExperimentConfig out;
    out.raw = cfg;
    if (cfg.has_section("dgp")) out.dgp = StructuralDgp::from_config(cfg, "dgp");

    for (const auto& section : cfg.sections_with_prefix("pair")) {
        if (section == "pair") continue;
        PairSpec ps;
        ps.name = section.substr(std::string("pair.").size());
        ps.pair.alpha0 = Manipulation::parse(cfg.str_or(section, "alpha0", "identity"));
        ps.pair.alpha1 = Manipulation::parse(cfg.str(section, "alpha1"));
        out.pairs.push_back(std::move(ps));
    }
    return out;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    return parse(TextConfig::parse_file(path));
}

PropensityPtr ExperimentConfig::fit_propensity(const Sample& sample) const {
    const std::string kind = raw.str_or("propensity", "kind", "logit");
    const double trim = raw.num_or("propensity", "trim_eps", 1e-3);
    if (kind == "oracle") {
        if (!dgp) throw ConfigError("oracle propensity requested without a [dgp] section");
        return std::make_shared<OraclePropensity>(*dgp, trim);
    }
    if (kind == "logit") {
        FeatureMap features;
        if (raw.has("propensity", "features")) {
            features = FeatureMap::parse(raw.str_list("propensity", "features"));
        } else {
            // Linear terms plus the z1*z2 interaction when a second
            // instrument is present.
            std::vector<std::string> names{"1"};
            for (int j = 0; j < sample.d_x(); ++j) names.push_back("x" + std::to_string(j + 1));
            for (int j = 0; j < sample.d_z(); ++j) names.push_back("z" + std::to_string(j + 1));
            if (sample.d_z() >= 2) names.push_back("z1*z2");
            features = FeatureMap::parse(names);
        }
        return std::make_shared<LogitPropensity>(fit_logit(sample, features, trim));
    }
    if (kind == "local_poly") {
        const int degree = static_cast<int>(raw.num_or("propensity", "degree", 1));
        const Kernel kernel = Kernel::parse(raw.str_or("propensity", "kernel", "gaussian"));
        double h;
        if (raw.has("propensity", "bandwidth_grid")) {
            h = cv_bandwidth(sample, raw.num_list("propensity", "bandwidth_grid"), degree,
                             kernel);
        } else {
            h = raw.num("propensity", "bandwidth");
        }
        return std::make_shared<LocalPolyPropensity>(
            fit_local_poly(sample, degree, h, kernel, trim));
    }
    if (kind == "series") {
        return std::make_shared<SeriesPropensity>(
            fit_series(sample, raw.str_or("propensity", "basis", "polynomial"),
                       static_cast<int>(raw.num("propensity", "terms")), trim));
    }
    throw ConfigError("unknown propensity kind '" + kind + "'");
}

MtePtr ExperimentConfig::fit_mte(const Sample& sample, const PropensityModel& p_model) const {
    const std::string kind = raw.str_or("mte", "kind", "partially_linear");
    std::optional<ColumnSelector> sel;
    if (raw.has("mte", "covariates")) {
        sel = ColumnSelector::parse(raw.str_list("mte", "covariates"));
    }
    const ColumnSelector* selp = sel ? &*sel : nullptr;
    if (kind == "oracle") {
        if (!dgp) throw ConfigError("oracle MTE requested without a [dgp] section");
        return std::make_shared<OracleMte>(*dgp);
    }
    if (kind == "polynomial") {
        return std::make_shared<PolynomialMte>(fit_polynomial_mte(
            sample, p_model, static_cast<int>(raw.num_or("mte", "degree", 2)), selp));
    }
    if (kind == "partially_linear") {
        return std::make_shared<PartiallyLinearMte>(fit_partially_linear_mte(
            sample, p_model, raw.num_or("mte", "bandwidth", 0.06), selp));
    }
    if (kind == "liv") {
        return std::make_shared<LivMte>(
            fit_liv_mte(sample, p_model, raw.num_or("mte", "bandwidth", 0.1), selp));
    }
    throw ConfigError("unknown MTE kind '" + kind + "'");
}

ColumnSelector ExperimentConfig::policy_features(const Sample& sample) const {
    if (raw.has("policy", "features")) {
        return ColumnSelector::parse(raw.str_list("policy", "features"));
    }
    std::vector<std::string> names{"z1"};
    if (sample.d_z() >= 2) names.push_back("z2");
    return ColumnSelector::parse(names);
}

CostSpec ExperimentConfig::cost_spec(const Sample& sample) const {
    CostSpec cost;
    const std::string kind = raw.str_or("cost", "kind", "manipulation_gap");
    if (kind == "manipulation_gap") {
        cost.kind = CostSpec::Kind::ManipulationGap;
    } else if (kind == "table") {
        cost.kind = CostSpec::Kind::Table;
        const std::string path = raw.str("cost", "values_path");
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open cost table: " + path);
        std::vector<double> values;
        double v;
        while (in >> v) values.push_back(v);
        cost.table = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                       static_cast<long>(values.size()));
    } else {
        throw ConfigError("unknown cost kind '" + kind + "'");
    }
    cost.kappa = raw.num_or("cost", "kappa", std::numeric_limits<double>::infinity());
    cost.validate(sample.n());
    return cost;
}

PolicyClass ExperimentConfig::policy_class() const {
    const std::string cls = raw.str_or("policy", "class", "les");
    if (cls == "les") return PolicyClass::Les;
    if (cls == "ta") return PolicyClass::Ta;
    throw ConfigError("unknown policy class '" + cls + "'");
}

Backend ExperimentConfig::backend() const {
    const std::string b = raw.str_or("policy", "backend", "enumerate");
    if (b == "enumerate") return Backend::Enumerate;
    if (b == "milp") return Backend::Milp;
    throw ConfigError("unknown backend '" + b + "'");
}

double ExperimentConfig::kappa() const {
    return raw.num_or("cost", "kappa", std::numeric_limits<double>::infinity());
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

Eigen::VectorXi assignments_for(const PolicySpec& policy, const GainVector& gains) {
    Eigen::VectorXi out(gains.n());
    if (policy.is_empty()) {
        out.setZero();
        return out;
    }
    for (int i = 0; i < gains.n(); ++i) {
        out(i) = policy.assign_features(gains.v.row(i));
    }
    return out;
}

PolicySpec constant_policy(int d_v, const std::vector<std::string>& names,
                           const ManipulationPair& pair, bool all_in) {
    PolicySpec spec;
    spec.kind = PolicySpec::Kind::Les;
    spec.lambda = Eigen::VectorXd::Zero(d_v + 1);
    spec.lambda(0) = all_in ? 1.0 : -1.0;
    spec.feature_names = names;
    spec.pair = pair;
    return spec;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& config, const Sample& sample) {
    sample.validate();
    if (config.pairs.empty()) {
        throw ConfigError("pipeline needs at least one [pair.<name>] section");
    }

    PipelineResult result;
    result.echoed_config = config.raw;

    const PropensityPtr p_model = config.fit_propensity(sample);
    const MtePtr mte_model = config.fit_mte(sample, *p_model);
    const ColumnSelector features = config.policy_features(sample);
    const CostSpec cost = config.cost_spec(sample);
    const double kappa = config.kappa();

    // Grid geometry shared by all pairs.
    const int grid_steps = static_cast<int>(config.raw.num_or("output", "grid_steps", 41));
    Eigen::VectorXd x_median(sample.d_x());
    for (int j = 0; j < sample.d_x(); ++j) x_median(j) = column_median(sample.x.col(j));
    const double z1_lo = sample.z.col(0).minCoeff(), z1_hi = sample.z.col(0).maxCoeff();
    double z2_lo = 0.0, z2_hi = 0.0;
    if (sample.d_z() >= 2) {
        z2_lo = sample.z.col(1).minCoeff();
        z2_hi = sample.z.col(1).maxCoeff();
    }

    for (const auto& ps : config.pairs) {
        const GainVector gains =
            build_gains(sample, *p_model, *mte_model, ps.pair, cost, features);

        std::vector<std::pair<std::string, PolicySpec>> learned;
        learned.emplace_back("fewm",
                             solve_fewm(gains, config.policy_class(), config.backend()));
        if (std::isfinite(kappa)) {
            learned.emplace_back(
                "bewm", solve_bewm(gains, config.policy_class(), kappa, config.backend()));
        }
        learned.emplace_back("encourage_all", constant_policy(features.size(), gains.v_names,
                                                              ps.pair, true));

        for (const auto& [name, policy] : learned) {
            const Eigen::VectorXi assign = assignments_for(policy, gains);
            PipelineRow row;
            row.pair_name = ps.name;
            row.policy_name = name;
            row.report = make_report(gains, assign);
            result.rows.push_back(row);
            if (name != "encourage_all") {
                result.policies.emplace_back("policy_" + ps.name + "_" + name, policy);
            }
        }

        // Take-up change and conditional PRTE surfaces at the median x.
        ContourGrid takeup{"takeup_" + ps.name, {}};
        ContourGrid prte{"prte_" + ps.name, {}};
        for (int a = 0; a < grid_steps; ++a) {
            const double z1 = z1_lo + (z1_hi - z1_lo) * a / std::max(1, grid_steps - 1);
            const int z2_steps = (sample.d_z() >= 2) ? grid_steps : 1;
            for (int b = 0; b < z2_steps; ++b) {
                const double z2 =
                    (sample.d_z() >= 2)
                        ? z2_lo + (z2_hi - z2_lo) * b / std::max(1, grid_steps - 1)
                        : 0.0;
                Eigen::VectorXd z = Eigen::VectorXd::Zero(sample.d_z());
                z(0) = z1;
                if (sample.d_z() >= 2) z(1) = z2;
                const double p_base = p_model->predict(x_median, z);
                const double p_new = p_model->predict(x_median, ps.pair.manipulate(1, z));
                takeup.cells.push_back({z1, z2, p_new - p_base});
                double value = std::numeric_limits<double>::quiet_NaN();
                if (std::abs(p_new - p_base) > 1e-12) {
                    try {
                        value = mte_model->integrate(x_median, z, p_base, p_new) /
                                (p_new - p_base);
                    } catch (const ExtrapolationError&) {
                        // outside the identified range: leave the cell empty
                    }
                }
                prte.cells.push_back({z1, z2, value});
            }
        }
        result.grids.push_back(std::move(takeup));
        result.grids.push_back(std::move(prte));
    }
    return result;
}

void write_pipeline_outputs(const PipelineResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        std::ofstream csv(out_dir + "/report.csv");
        csv << "pair,policy,share_eligible,welfare_gain,avg_takeup_change,prte\n";
        for (const auto& row : result.rows) {
            csv << row.pair_name << "," << row.policy_name << ","
                << format_num(row.report.share_eligible) << ","
                << format_num(row.report.welfare_gain) << ","
                << format_num(row.report.avg_takeup_change) << ","
                << (row.report.prte_defined ? format_num(row.report.prte) : "nan") << "\n";
        }
    }
    {
        nlohmann::ordered_json j;
        j["rows"] = nlohmann::ordered_json::array();
        for (const auto& row : result.rows) {
            nlohmann::ordered_json r;
            r["pair"] = row.pair_name;
            r["policy"] = row.policy_name;
            r["share_eligible"] = row.report.share_eligible;
            r["welfare_gain"] = row.report.welfare_gain;
            r["avg_takeup_change"] = row.report.avg_takeup_change;
            if (row.report.prte_defined) {
                r["prte"] = row.report.prte;
            } else {
                r["prte"] = nullptr;
                r["prte_undefined"] = true;
            }
            j["rows"].push_back(r);
        }
        std::ofstream(out_dir + "/report.json") << j.dump(2) << "\n";
    }
    for (const auto& [stem, policy] : result.policies) {
        std::ofstream(out_dir + "/" + stem + ".json") << policy_to_json(policy) << "\n";
    }
    for (const auto& grid : result.grids) {
        std::ofstream csv(out_dir + "/grid_" + grid.name + ".csv");
        csv << "z1,z2,value\n";
        for (const auto& cell : grid.cells) {
            csv << format_num(cell[0]) << "," << format_num(cell[1]) << ","
                << (std::isnan(cell[2]) ? std::string("nan") : format_num(cell[2])) << "\n";
        }
    }
    result.echoed_config.write_file(out_dir + "/config_echo.cfg");
}

// ---------------------------------------------------------------------------
// Oracle evaluation

OracleEvaluator::OracleEvaluator(const StructuralDgp& dgp, const ManipulationPair& pair,
                                 const ColumnSelector& features, int draws, std::uint64_t seed)
    : pair_(pair) {
    dgp.validate();
    if (draws < 1) throw ConfigError("oracle evaluator needs at least one draw");
    Rng rng(seed, 9001);
    v_.resize(draws, features.size());
    gain_.resize(draws);
    c1_.resize(draws);
    c0_.resize(draws);
    names_ = features.names();

    Eigen::VectorXd x(dgp.d_x()), z(dgp.d_z());
    for (int i = 0; i < draws; ++i) {
        for (int j = 0; j < dgp.d_x(); ++j) {
            x(j) = dgp.covariate_law[static_cast<std::size_t>(j)].sample(rng);
        }
        for (int j = 0; j < dgp.d_z(); ++j) {
            z(j) = dgp.instrument_law[static_cast<std::size_t>(j)].sample(rng);
        }
        const Eigen::VectorXd z0 = pair.manipulate(0, z);
        const Eigen::VectorXd z1 = pair.manipulate(1, z);
        const double p0 = dgp.propensity(x, z0);
        const double p1 = dgp.propensity(x, z1);
        v_.row(i) = features.row(x, z).transpose();
        gain_(i) = oracle_mte_integral(dgp, x, p0, p1);
        c0_(i) = std::abs(z0(0) - z(0)) * p0;
        c1_(i) = std::abs(z1(0) - z(0)) * p1;
    }
}

double OracleEvaluator::contrast(const PolicySpec& policy) const {
    if (policy.is_empty()) return 0.0;  // no feasible rule: everyone stays on alpha0
    double total = 0.0;
    for (Eigen::Index i = 0; i < gain_.size(); ++i) {
        if (policy.assign_features(v_.row(i))) total += gain_(i);
    }
    return total / static_cast<double>(gain_.size());
}

double OracleEvaluator::budget(const PolicySpec& policy) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < gain_.size(); ++i) {
        const bool in = !policy.is_empty() && policy.assign_features(v_.row(i));
        total += in ? c1_(i) : c0_(i);
    }
    return total / static_cast<double>(gain_.size());
}

PolicySpec OracleEvaluator::best_over(const std::vector<Eigen::VectorXd>& thetas,
                                      double kappa) const {
    return solve_les_candidates(gain_, v_, names_, pair_, thetas, &c1_, &c0_, kappa);
}

std::vector<Eigen::VectorXd> threshold_reference_rules(const Eigen::VectorXd& feature,
                                                       int count) {
    std::vector<double> sorted(feature.data(), feature.data() + feature.size());
    std::sort(sorted.begin(), sorted.end());
    std::vector<Eigen::VectorXd> thetas;
    thetas.reserve(2 * static_cast<std::size_t>(count));
    for (int q = 1; q <= count; ++q) {
        const double frac = static_cast<double>(q) / (count + 1);
        const double t =
            sorted[static_cast<std::size_t>(frac * (static_cast<double>(sorted.size()) - 1))];
        Eigen::VectorXd up(2), down(2);
        up << -t, 1.0;    // eligible iff v >= t
        down << t, -1.0;  // eligible iff v <= t
        thetas.push_back(up);
        thetas.push_back(down);
    }
    return thetas;
}

// ---------------------------------------------------------------------------
// Monte Carlo harness

namespace {

struct RepOutcome {
    bool ok = false;
    double regret = 0.0;
    double true_budget = 0.0;
    double p_mse = 0.0;
    double mte_err = 0.0;
};

std::uint64_t derive_seed(std::uint64_t base, int lane, int index) {
    Rng r(base, 7700 + static_cast<std::uint64_t>(lane));
    Rng sub = r.substream(static_cast<std::uint64_t>(index));
    return sub.next_u64();
}

}  // namespace

RegretCurve run_montecarlo(const ExperimentConfig& config) {
    if (!config.dgp) throw ConfigError("the Monte Carlo harness needs a [dgp] section");
    if (config.pairs.empty()) throw ConfigError("the Monte Carlo harness needs a pair");
    const StructuralDgp dgp = *config.dgp;
    const ManipulationPair pair = config.pairs.front().pair;

    const TextConfig& raw = config.raw;
    const std::string learner = raw.str_or("montecarlo", "learner", "fewm");
    if (learner != "fewm" && learner != "bewm" && learner != "dr") {
        throw ConfigError("unknown learner '" + learner + "'");
    }
    std::vector<int> n_grid;
    for (double n : raw.num_list("montecarlo", "n_grid")) n_grid.push_back(static_cast<int>(n));
    const int replications = static_cast<int>(raw.num("montecarlo", "replications"));
    if (replications < 1) throw ConfigError("replications must be positive");
    const std::uint64_t seed = static_cast<std::uint64_t>(raw.num_or("montecarlo", "seed", 1));
    const int eval_draws =
        static_cast<int>(raw.num_or("montecarlo", "eval_draws", 1000000));
    const int reference_rules =
        static_cast<int>(raw.num_or("montecarlo", "reference_rules", 10000));
    const bool oracle_nuisances = raw.flag_or("montecarlo", "oracle_nuisances", false);
    int threads = static_cast<int>(raw.num_or("montecarlo", "threads", 0));
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    const double kappa = config.kappa();
    const bool constrained = (learner == "bewm") && std::isfinite(kappa);

    // Placeholder sample so selector/feature parsing can see the shapes.
    const Sample probe = sample_dgp(dgp, 8, seed ^ 0xABCD);
    const ColumnSelector features = config.policy_features(probe);

    const OracleEvaluator eval(dgp, pair, features, eval_draws, seed);
    std::vector<Eigen::VectorXd> thetas;
    if (features.size() == 1) {
        thetas = threshold_reference_rules(eval.features().col(0), reference_rules);
    } else {
        Rng dir_rng(seed, 4242);
        for (int r = 0; r < reference_rules; ++r) {
            Eigen::VectorXd theta(features.size() + 1);
            for (Eigen::Index j = 0; j < theta.size(); ++j) {
                theta(j) = dir_rng.uniform(-1.0, 1.0);
            }
            thetas.push_back(theta);
        }
    }

    const PolicySpec best = eval.best_over(thetas, std::numeric_limits<double>::infinity());
    const PolicySpec best_budgeted =
        constrained ? eval.best_over(thetas, kappa) : best;
    const double target = constrained ? best_budgeted.attained_welfare : best.attained_welfare;

    // Per-u grid for the MTE error diagnostic at the median covariate draw.
    Eigen::VectorXd x_med(dgp.d_x()), z_med(dgp.d_z());
    {
        const Sample big = sample_dgp(dgp, 4001, seed ^ 0x5EED);
        for (int j = 0; j < dgp.d_x(); ++j) x_med(j) = column_median(big.x.col(j));
        for (int j = 0; j < dgp.d_z(); ++j) z_med(j) = column_median(big.z.col(j));
    }

    DrNuisanceConfig dr_cfg;
    dr_cfg.phi_kind = raw.str_or("dr", "phi_kind", "polynomial");
    dr_cfg.phi_degree = static_cast<int>(raw.num_or("dr", "phi_degree", 2));
    dr_cfg.phi_bandwidth = raw.num_or("dr", "phi_bandwidth", 0.06);
    dr_cfg.g_bandwidth = raw.num_or("dr", "g_bandwidth", 0.0);
    dr_cfg.g_max = raw.num_or("dr", "g_max", 20.0);
    const int dr_folds = static_cast<int>(raw.num_or("dr", "folds", 5));
    const std::string dr_g_source = raw.str_or("dr", "g_source", "kernel_ratio");

    RegretCurve curve;
    curve.learner = learner;
    curve.best_in_class_welfare = target;
    curve.echoed_config = raw;

    int lane = 0;
    for (int n : n_grid) {
        std::vector<RepOutcome> outcomes(static_cast<std::size_t>(replications));
        std::atomic<int> next{0};

        auto run_rep = [&](int r) {
            RepOutcome out;
            const std::uint64_t rep_seed = derive_seed(seed, lane, r);
            try {
                const Sample sample = sample_dgp(dgp, n, rep_seed);
                PolicySpec learned;

                if (learner == "dr") {
                    DrNuisanceConfig cfg = dr_cfg;
                    cfg.fold_seed = rep_seed;
                    cfg.oracle_nuisances = oracle_nuisances;
                    DrGSource src = DrGSource::KernelRatio;
                    if (oracle_nuisances || dr_g_source == "oracle") {
                        cfg.oracle_dgp = &dgp;
                        if (dr_g_source == "oracle") src = DrGSource::Oracle;
                    }
                    if (oracle_nuisances) src = DrGSource::Oracle;
                    const DrScoreSet scores = dr_scores(sample, dr_folds, pair, cfg, src);
                    const Eigen::MatrixXd v = features.matrix(sample.x, sample.z);
                    learned = solve_les_candidates(scores.gamma, v, features.names(), pair,
                                                   thetas);
                } else {
                    PropensityPtr p_model;
                    MtePtr mte_model;
                    if (oracle_nuisances) {
                        p_model = std::make_shared<OraclePropensity>(dgp);
                        mte_model = std::make_shared<OracleMte>(dgp);
                    } else {
                        p_model = config.fit_propensity(sample);
                        mte_model = config.fit_mte(sample, *p_model);
                    }
                    CostSpec cost;
                    cost.kind = CostSpec::Kind::ManipulationGap;
                    cost.kappa = kappa;
                    const GainVector gains =
                        build_gains(sample, *p_model, *mte_model, pair, cost, features);
                    if (constrained) {
                        learned = solve_les_candidates(gains.g, gains.v, gains.v_names, pair,
                                                       thetas, &gains.c1, &gains.c0, kappa);
                    } else {
                        learned = solve_les_candidates(gains.g, gains.v, gains.v_names, pair,
                                                       thetas);
                    }

                    double mse = 0.0;
                    for (int i = 0; i < sample.n(); ++i) {
                        const double diff = p_model->predict(sample.x.row(i), sample.z.row(i)) -
                                            dgp.propensity(sample.x.row(i), sample.z.row(i));
                        mse += diff * diff;
                    }
                    out.p_mse = mse / sample.n();
                    double sup_err = 0.0;
                    for (int gidx = 1; gidx <= 19; ++gidx) {
                        const double u = gidx / 20.0;
                        sup_err = std::max(sup_err,
                                           std::abs(mte_model->eval(u, x_med, z_med) -
                                                    oracle_mte(dgp, u, x_med)));
                    }
                    out.mte_err = sup_err;
                }

                out.regret = target - eval.contrast(learned);
                out.true_budget = eval.budget(learned);
                out.ok = true;
            } catch (const std::exception&) {
                out.ok = false;  // recorded, not fatal
            }
            return out;
        };

        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&]() {
                for (int r = next.fetch_add(1); r < replications; r = next.fetch_add(1)) {
                    outcomes[static_cast<std::size_t>(r)] = run_rep(r);
                }
            });
        }
        for (auto& th : pool) th.join();

        RegretPoint point;
        point.n = n;
        point.replications = replications;
        double sum = 0.0, sumsq = 0.0;
        int ok_count = 0;
        for (const auto& out : outcomes) {
            if (!out.ok) {
                ++point.failures;
                continue;
            }
            ++ok_count;
            sum += out.regret;
            sumsq += out.regret * out.regret;
            point.mean_budget_violation += std::max(0.0, out.true_budget - kappa);
            if (out.true_budget > kappa + 0.01) point.budget_violation_freq += 1.0;
            if (out.regret <= 0.01) point.near_optimal_freq += 1.0;
            point.mean_p_mse += out.p_mse;
            point.mean_mte_err += out.mte_err;
        }
        if (ok_count > 0) {
            point.mean_regret = sum / ok_count;
            const double var = std::max(0.0, sumsq / ok_count -
                                                 point.mean_regret * point.mean_regret);
            point.se_regret = std::sqrt(var / ok_count);
            point.mean_budget_violation /= ok_count;
            point.budget_violation_freq /= ok_count;
            point.near_optimal_freq /= ok_count;
            point.mean_p_mse /= ok_count;
            point.mean_mte_err /= ok_count;
        }
        if (!constrained) {
            point.mean_budget_violation = 0.0;
            point.budget_violation_freq = 0.0;
        }
        curve.points.push_back(point);
        ++lane;
    }

    // Log-log regret slope over the grid (points with positive mean regret).
    std::vector<double> lx, ly;
    for (const auto& p : curve.points) {
        if (p.mean_regret > 0) {
            lx.push_back(std::log(static_cast<double>(p.n)));
            ly.push_back(std::log(p.mean_regret));
        }
    }
    if (lx.size() >= 2) {
        const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
        const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        curve.loglog_slope = (sxx > 0) ? sxy / sxx : 0.0;
    }
    return curve;
}

void write_regret_outputs(const RegretCurve& curve, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream csv(out_dir + "/regret_curve.csv");
        csv << "n,replications,failures,mean_regret,se_regret,mean_budget_violation,"
               "budget_violation_freq,near_optimal_freq,mean_p_mse,mean_mte_err\n";
        for (const auto& p : curve.points) {
            csv << p.n << "," << p.replications << "," << p.failures << ","
                << format_num(p.mean_regret) << "," << format_num(p.se_regret) << ","
                << format_num(p.mean_budget_violation) << ","
                << format_num(p.budget_violation_freq) << ","
                << format_num(p.near_optimal_freq) << "," << format_num(p.mean_p_mse) << ","
                << format_num(p.mean_mte_err) << "\n";
        }
    }
    {
        nlohmann::ordered_json j;
        j["learner"] = curve.learner;
        j["loglog_slope"] = curve.loglog_slope;
        j["best_in_class_welfare"] = curve.best_in_class_welfare;
        j["points"] = nlohmann::ordered_json::array();
        for (const auto& p : curve.points) {
            nlohmann::ordered_json pj;
            pj["n"] = p.n;
            pj["replications"] = p.replications;
            pj["failures"] = p.failures;
            pj["mean_regret"] = p.mean_regret;
            pj["se_regret"] = p.se_regret;
            pj["mean_budget_violation"] = p.mean_budget_violation;
            pj["budget_violation_freq"] = p.budget_violation_freq;
            pj["near_optimal_freq"] = p.near_optimal_freq;
            pj["mean_p_mse"] = p.mean_p_mse;
            pj["mean_mte_err"] = p.mean_mte_err;
            j["points"].push_back(pj);
        }
        std::ofstream(out_dir + "/regret_curve.json") << j.dump(2) << "\n";
    }
    curve.echoed_config.write_file(out_dir + "/config_echo.cfg");
}

}  // namespace ewmiv
