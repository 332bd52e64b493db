#ifndef EWMIV_EXPERIMENTS_HPP
#define EWMIV_EXPERIMENTS_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ewmiv/dataset.hpp"
#include "ewmiv/mte.hpp"
#include "ewmiv/policy.hpp"
#include "ewmiv/propensity.hpp"
#include "ewmiv/structural.hpp"
#include "ewmiv/text_config.hpp"
#include "ewmiv/welfare.hpp"

namespace ewmiv {

/// A named manipulation pair from the experiment config.
struct PairSpec {
    std::string name;
    ManipulationPair pair;
};

/**
 * Parsed experiment configuration. The raw text file is kept verbatim and
 * echoed into every output artifact, seeds included, so runs are
 * reproducible from their outputs alone.
 */
struct ExperimentConfig {
    TextConfig raw;
    std::optional<StructuralDgp> dgp;
    std::vector<PairSpec> pairs;

    static ExperimentConfig parse(const TextConfig& cfg);
    static ExperimentConfig parse_file(const std::string& path);

    // Estimator factories honoring the [propensity] / [mte] sections.
    PropensityPtr fit_propensity(const Sample& sample) const;
    MtePtr fit_mte(const Sample& sample, const PropensityModel& p_model) const;
    ColumnSelector policy_features(const Sample& sample) const;
    CostSpec cost_spec(const Sample& sample) const;
    PolicyClass policy_class() const;
    Backend backend() const;
    double kappa() const;
};

struct PipelineRow {
    std::string pair_name;
    std::string policy_name;
    WelfareReport report;
};

struct ContourGrid {
    std::string name;  // e.g. "takeup_median" or "prte_median"
    std::vector<std::array<double, 3>> cells;  // (z1, z2, value)
};

struct PipelineResult {
    std::vector<PipelineRow> rows;
    std::vector<std::pair<std::string, PolicySpec>> policies;  // (file stem, spec)
    std::vector<ContourGrid> grids;
    TextConfig echoed_config;
};

/**
 * The full estimation pipeline on one dataset: fit the propensity score and
 * MTE, build gains for every configured pair, solve the unconstrained and
 * budget-constrained rules, and report the four summary columns per policy
 * (always including the encourage-everyone benchmark). Also produces
 * take-up-change and conditional-PRTE grids over (z1, z2) at the
 * feature-wise sample median of x.
 */
PipelineResult run_pipeline(const ExperimentConfig& config, const Sample& sample);

void write_pipeline_outputs(const PipelineResult& result, const std::string& out_dir);

struct RegretPoint {
    int n = 0;
    int replications = 0;
    int failures = 0;
    double mean_regret = 0.0;
    double se_regret = 0.0;
    double mean_budget_violation = 0.0;  // E[max(B - kappa, 0)]
    double budget_violation_freq = 0.0;  // Pr(B > kappa + 0.01)
    double near_optimal_freq = 0.0;      // Pr(regret <= 0.01)
    double mean_p_mse = 0.0;
    double mean_mte_err = 0.0;  // sup over a u-grid at the median covariate
};

struct RegretCurve {
    std::string learner;
    std::vector<RegretPoint> points;
    double loglog_slope = 0.0;
    double best_in_class_welfare = 0.0;  // oracle contrast of the class best
    TextConfig echoed_config;
};

/**
 * Monte Carlo regret harness. For each sample size in the grid it runs R
 * replications of the configured learner on fresh draws from the generating
 * process (independent substreams per replication, partitioned across
 * worker threads) and measures true regret against the best rule in a fixed
 * finite reference class, evaluated once on a large cached sample. Learner
 * failures are recorded per replication, never fatal.
 */
RegretCurve run_montecarlo(const ExperimentConfig& config);

void write_regret_outputs(const RegretCurve& curve, const std::string& out_dir);

/// Oracle-side policy value calculator shared by the harness and tests:
/// caches per-row truth (propensities under both arms, MTE integral, costs)
/// for a large evaluation sample.
class OracleEvaluator {
public:
    OracleEvaluator(const StructuralDgp& dgp, const ManipulationPair& pair,
                    const ColumnSelector& features, int draws, std::uint64_t seed);

    /// True welfare contrast E[pi * integral] of a rule over feature rows.
    double contrast(const PolicySpec& policy) const;
    /// True expected cost of realized take-up (manipulation-gap cost).
    double budget(const PolicySpec& policy) const;

    /// Best contrast over an explicit rule list (constants always added);
    /// pass a finite kappa for the constrained best.
    PolicySpec best_over(const std::vector<Eigen::VectorXd>& thetas, double kappa) const;

    const Eigen::MatrixXd& features() const { return v_; }
    const Eigen::VectorXd& true_gains() const { return gain_; }

private:
    Eigen::MatrixXd v_;
    Eigen::VectorXd gain_, c1_, c0_;
    std::vector<std::string> names_;
    ManipulationPair pair_;
};

/// Evenly spaced quantile thresholds over one feature column, both
/// orientations: the finite reference class used by the regret harness.
std::vector<Eigen::VectorXd> threshold_reference_rules(const Eigen::VectorXd& feature,
                                                       int count);

}  // namespace ewmiv

#endif
