#ifndef EWMIV_WELFARE_HPP
#define EWMIV_WELFARE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ewmiv/dataset.hpp"
#include "ewmiv/features.hpp"
#include "ewmiv/mte.hpp"
#include "ewmiv/propensity.hpp"
#include "ewmiv/structural.hpp"

namespace ewmiv {

/// Per-unit cost of encouragement, charged on realized take-up.
struct CostSpec {
    enum class Kind { ManipulationGap, Table };
    Kind kind = Kind::ManipulationGap;
    double kappa = 0.0;
    Eigen::VectorXd table;  // per-row costs for Kind::Table

    /// Cost when z1 is manipulated to z1_new; |z1_new - z1| for the gap kind.
    double arm_cost(const Eigen::VectorXd& z, double z1_new, int row) const;
    ArmCostFn arm_cost_fn() const;  // population form; Table kind has none
    void validate(int n) const;
};

/**
 * Everything a policy optimizer needs, one entry per observation:
 *   g_i  = integral of the fitted MTE from p(x_i, alpha0(z_i)) to
 *          p(x_i, alpha1(z_i)),
 *   c1_i/c0_i = cost times manipulated propensity under each arm,
 *   v    = policy feature rows.
 * Empirical welfare of a rule pi is mean(pi * g); its budget is
 * mean(pi*c1 + (1-pi)*c0).
 */
struct GainVector {
    Eigen::VectorXd g;
    Eigen::VectorXd c1, c0;
    Eigen::VectorXd p1, p0;
    Eigen::MatrixXd v;
    std::vector<std::string> v_names;
    ManipulationPair pair;

    int n() const { return static_cast<int>(g.size()); }
};

/**
 * Row gains for a manipulation pair. Rows whose propensity interval falls
 * outside the MTE model's identified range raise ExtrapolationError listing
 * the offending rows; values are never silently clamped.
 */
GainVector build_gains(const Sample& sample, const PropensityModel& p_model,
                       const MteModel& mte_model, const ManipulationPair& pair,
                       const CostSpec& cost, const ColumnSelector& features);

/// The four reporting columns for one policy.
struct WelfareReport {
    double share_eligible = 0.0;
    double welfare_gain = 0.0;
    double avg_takeup_change = 0.0;
    double prte = 0.0;
    bool prte_defined = false;
};

WelfareReport make_report(const GainVector& gains, const Eigen::VectorXi& assignments);
/// Same, with an explicit baseline take-up vector in place of gains.p0.
WelfareReport make_report(const GainVector& gains, const Eigen::VectorXi& assignments,
                          const Eigen::VectorXd& baseline_takeup);

// ---------------------------------------------------------------------------
// Doubly robust scores

enum class DrGSource { Oracle, KernelRatio };

struct DrScoreSet {
    Eigen::VectorXd gamma;  // score per observation
    Eigen::VectorXi fold_id;
    int folds = 0;
    std::string g_source;
};

struct DrNuisanceConfig {
    /// Logit feature map for the per-fold propensity fit; empty means linear
    /// in all (x, z) columns plus an intercept.
    std::vector<std::string> propensity_features;
    std::string phi_kind = "polynomial";  // conditional-mean estimator
    int phi_degree = 2;
    double phi_bandwidth = 0.06;
    double g_bandwidth = 0.0;  // kernel ratio; 0 picks a rule-of-thumb value
    int g_kde_centers = 2000;  // kernel-center cap for the ratio densities
    double g_max = 20.0;       // clamp on |g-hat|
    /// Sensitivity multipliers applied to the fitted nuisances (1 = off).
    double phi_scale = 1.0;
    double g_scale = 1.0;
    std::uint64_t fold_seed = 0;
    /// True process backing oracle nuisances and the closed-form density
    /// ratio. Required when `oracle_nuisances` is set or the ratio source
    /// is the oracle.
    const StructuralDgp* oracle_dgp = nullptr;
    /// Use the true propensity and conditional mean instead of fitting.
    bool oracle_nuisances = false;
};

/**
 * Cross-fitted doubly robust scores: the data are split into K evenly sized
 * folds; each observation's score combines conditional-mean contrasts at
 * the two manipulated propensities with a density-ratio-weighted residual
 * correction, all nuisances fit on the other folds. The score mean stays
 * consistent if either the conditional mean or the density ratio is
 * correct.
 */
DrScoreSet dr_scores(const Sample& sample, int folds, const ManipulationPair& pair,
                     const DrNuisanceConfig& config, DrGSource g_source);

/// One row per observation: score and fold id.
void write_dr_scores_csv(const DrScoreSet& scores, const std::string& path);
std::string dr_scores_to_json(const DrScoreSet& scores);

// ---------------------------------------------------------------------------
// Binary-instrument variants

/**
 * Plug-in welfare of assigning a binary instrument: mean over rows of
 * E-hat[Y | X, Z=1] pi + E-hat[Y | X, Z=0] (1 - pi). Conditional means use
 * cell averages when every covariate is discrete and locally linear
 * smoothing otherwise. A covariate cell observed under only one arm raises
 * EstimationError listing the cells.
 */
double binary_iv_welfare(const Sample& sample, const Eigen::VectorXi& assignments);

/**
 * Welfare under random rationing of a capped take-up share kappa: the
 * encouragement contrast is scaled by
 * min{1, (kappa - E[D(0)]) / (E[D(pi)] - E[D(0)])}.
 * Raises InfeasibleError when even the never-encouraged take-up exceeds
 * kappa.
 */
double rationed_welfare(const Sample& sample, const Eigen::VectorXi& assignments, double kappa);

}  // namespace ewmiv

#endif
