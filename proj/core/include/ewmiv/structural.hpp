#ifndef EWMIV_STRUCTURAL_HPP
#define EWMIV_STRUCTURAL_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "ewmiv/dataset.hpp"
#include "ewmiv/distributions.hpp"
#include "ewmiv/features.hpp"
#include "ewmiv/random.hpp"
#include "ewmiv/text_config.hpp"

namespace ewmiv {

/// Polynomial in one variable, coefficients in ascending degree order.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> coefs) : coefs_(std::move(coefs)) {}

    double operator()(double u) const;
    Polynomial derivative() const;
    /// Antiderivative with zero constant term.
    Polynomial antiderivative() const;
    Polynomial operator-(const Polynomial& other) const;

    int degree() const { return coefs_.empty() ? 0 : static_cast<int>(coefs_.size()) - 1; }
    const std::vector<double>& coefs() const { return coefs_; }
    /// max |p(u)| over [0,1] on a fine grid (used for bound reporting).
    double max_abs_on_unit() const;

private:
    std::vector<double> coefs_;
};

/**
 * A deterministic manipulation of the first instrument component.
 *   identity        z1 -> z1
 *   cap_subsidy(a)  z1 -> (z1 - a) * 1{z1 >= a}   (subsidy of up to a)
 *   shift(c)        z1 -> z1 + c
 *   set_to(v)       z1 -> v
 */
struct Manipulation {
    enum class Kind { Identity, CapSubsidy, Shift, SetTo };
    Kind kind = Kind::Identity;
    double param = 0.0;

    double apply(double z1) const;
    /// Whether the pushforward of a continuous z1 law stays absolutely
    /// continuous (no atoms). Needed for closed-form density ratios.
    bool preserves_continuity() const { return kind == Kind::Identity || kind == Kind::Shift; }

    static Manipulation parse(const std::string& spec);  // "identity", "cap_subsidy(2.5)", ...
    std::string to_string() const;
    bool operator==(const Manipulation&) const = default;
};

/// The two candidate manipulations of a binary encouragement decision.
/// alpha0 is the baseline arm (identity reproduces the status quo).
struct ManipulationPair {
    Manipulation alpha0;
    Manipulation alpha1;

    double apply(int arm, double z1) const { return arm ? alpha1.apply(z1) : alpha0.apply(z1); }
    /// Instrument vector with z1 replaced by the arm's manipulated value.
    Eigen::VectorXd manipulate(int arm, const Eigen::VectorXd& z) const;
    bool operator==(const ManipulationPair&) const = default;
};

/// Normalized selection index nu(x,z) in [0,1]; equals the propensity score.
struct SelectionIndex {
    enum class Link { Logistic, LinearClamp };
    Link link = Link::Logistic;
    FeatureMap features;
    Eigen::VectorXd gamma;

    double value(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
};

/// Conditional outcome means m_d(x, u) = x'beta_d + q_d(u).
struct OutcomeModel {
    Eigen::VectorXd beta0;
    Eigen::VectorXd beta1;
    Polynomial q0;
    Polynomial q1;

    double mean(int d, const Eigen::VectorXd& x, double u) const;
    double mte(double u, const Eigen::VectorXd& x) const;
    /// u-dependent part of the MTE, q1 - q0.
    Polynomial mte_u_part() const { return q1 - q0; }
};

/**
 * A generalized-Roy data generating process: independent marginal laws for
 * X and Z, selection D = 1{nu(X,Z) >= U} with U ~ Unif[0,1] independent of
 * (X, Z), and outcomes Y = m_D(X, U) + noise. Ground truth (propensity, MTE,
 * welfare, budget) is available in closed or Monte Carlo form for testing
 * and regret measurement.
 */
struct StructuralDgp {
    std::vector<MarginalDist> covariate_law;
    std::vector<MarginalDist> instrument_law;
    SelectionIndex selection;
    OutcomeModel outcome;
    double noise_scale = 0.0;

    int d_x() const { return static_cast<int>(covariate_law.size()); }
    int d_z() const { return static_cast<int>(instrument_law.size()); }

    double propensity(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
    /// Declared uniform bound on |MTE| over the law's support.
    double mte_bound() const;

    void validate() const;
    static StructuralDgp from_config(const TextConfig& cfg, const std::string& prefix = "dgp");
    void to_config(TextConfig& cfg, const std::string& prefix = "dgp") const;
};

/// Draws a sample of size n; identical (dgp, n, seed) gives identical bits.
Sample sample_dgp(const StructuralDgp& dgp, int n, std::uint64_t seed);

/// True MTE(u, x) = m1(x,u) - m0(x,u). Throws std::domain_error off [0,1].
double oracle_mte(const StructuralDgp& dgp, double u, const Eigen::VectorXd& x);

/// Exact E[Y | X=x, p(X,Z)=p] implied by the outcome model.
double conditional_outcome_given_p(const StructuralDgp& dgp, const Eigen::VectorXd& x, double p);

/// Exact signed integral of the true MTE over [lo, hi].
double oracle_mte_integral(const StructuralDgp& dgp, const Eigen::VectorXd& x, double lo,
                           double hi);

/// Binary decision rule evaluated on raw (x, z); 1 selects alpha1.
using AssignFn = std::function<int(const Eigen::VectorXd& x, const Eigen::VectorXd& z)>;

/// Per-arm manipulation cost; z1_new is the manipulated value of z1.
using ArmCostFn =
    std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& z, double z1_new)>;

enum class WelfareMethod { Formula, Simulation };

struct MonteCarloValue {
    double value = 0.0;
    double se = 0.0;
};

/**
 * Social welfare E[Y(D(alpha(X,Z)))] of the encouragement rule that applies
 * pair.alpha1 where assign()==1 and pair.alpha0 elsewhere.
 *
 * Formula mode averages, over Monte Carlo draws of (X, Z) only, the exact
 * conditional value E[Y | x,z] plus the MTE integral between the status-quo
 * and manipulated propensities (closed form in u). Simulation mode draws
 * (X, Z, U, noise) and averages realized counterfactual outcomes. The two
 * agree up to Monte Carlo error.
 */
MonteCarloValue oracle_welfare(const StructuralDgp& dgp, const ManipulationPair& pair,
                               const AssignFn& assign, WelfareMethod method, int draws,
                               std::uint64_t seed);

/// Expected cost of realized take-up under the rule,
/// E[C(X,Z) * (pi p(X,alpha1(Z)) + (1-pi) p(X,alpha0(Z)))].
MonteCarloValue oracle_budget(const StructuralDgp& dgp, const ManipulationPair& pair,
                              const AssignFn& assign, const ArmCostFn& cost, int draws,
                              std::uint64_t seed);

/**
 * Closed-form density ratio
 *   g(x,z) = (f_{X,alpha1(Z)}(x,z) - f_{X,alpha0(Z)}(x,z)) / f_{X,Z}(x,z)
 * for manipulations whose pushforward stays absolutely continuous
 * (identity/shift, or alpha1 == alpha0 where g == 0). Throws ConfigError
 * otherwise.
 */
double oracle_density_ratio(const StructuralDgp& dgp, const ManipulationPair& pair,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& z);

}  // namespace ewmiv

#endif
