#ifndef EWMIV_POLICY_HPP
#define EWMIV_POLICY_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ewmiv/structural.hpp"
#include "ewmiv/welfare.hpp"

namespace ewmiv {

enum class PolicyClass { Les, Ta };
enum class Backend { Enumerate, Milp };

/**
 * A binary encouragement rule: the manipulation pair plus an eligibility
 * classifier over policy features v.
 *   les:  assign = 1{lambda0 + lambda'v >= 0}, sup-norm normalized.
 *   ta:   assign = 1{sign_k v_k <= threshold_k for all k}.
 *   empty: distinguished sentinel returned when no rule meets the budget.
 */
struct PolicySpec {
    enum class Kind { Les, Ta, Empty };
    Kind kind = Kind::Empty;

    Eigen::VectorXd lambda;      // les: (lambda0, lambda); ||.||_inf = 1
    Eigen::VectorXd thresholds;  // ta
    Eigen::VectorXi signs;       // ta, entries in {-1, +1}
    ManipulationPair pair;
    std::vector<std::string> feature_names;
    double attained_welfare = 0.0;
    double attained_budget = 0.0;

    bool is_empty() const { return kind == Kind::Empty; }
    int assign_features(const Eigen::VectorXd& v) const;
    int assign(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
    AssignFn assign_fn() const;
};

std::string policy_to_json(const PolicySpec& spec);
PolicySpec policy_from_json(const std::string& text);

struct SolveOptions {
    double eps_tie = 1e-9;       // offset perturbation realizing open/closed sides
    double delta_margin = 1e-6;  // strict-side margin in the MILP linking constraints
};

/**
 * Maximizes mean(pi_i * g_i) over the policy class. The enumerate backend
 * generates hyperplanes through every affinely independent subset of up to
 * d_v feature points, tilted by +-eps_tie to realize each side assignment of
 * the touched points, plus both constant rules; it realizes every labeling
 * the class induces on the sample and requires d_v <= 3. The milp backend
 * runs branch-and-bound over the assignment vector with an LP feasibility
 * cut per node (binary pi_i, coefficients in [-1,1], margin delta_margin on
 * the excluded side).
 */
PolicySpec solve_fewm(const GainVector& gains, PolicyClass policy_class, Backend backend,
                      const SolveOptions& opts = {});

/// Same search restricted to rules with mean(pi c1 + (1-pi) c0) <= kappa;
/// returns the empty sentinel when no candidate is feasible.
PolicySpec solve_bewm(const GainVector& gains, PolicyClass policy_class, double kappa,
                      Backend backend, const SolveOptions& opts = {});

/// EWM on doubly robust scores in place of plug-in gains.
PolicySpec solve_dr_ewm(const DrScoreSet& scores, const Eigen::MatrixXd& v,
                        const std::vector<std::string>& feature_names,
                        const ManipulationPair& pair, PolicyClass policy_class, Backend backend,
                        const SolveOptions& opts = {});

/// Exhaustive threshold-allocation search: thresholds over the observed
/// coordinate values plus an exclude-all sentinel, all 2^d_v sign vectors.
PolicySpec solve_ta(const GainVector& gains);

/**
 * Argmax over an explicit list of linear rules (both constant rules are
 * always added). Used when the candidate scheme is fixed a priori, e.g. a
 * reference grid shared between a learner and its regret oracle. With a
 * single feature the sweep runs in O((n + m) log n). Pass c1/c0 and a
 * finite kappa to enforce the budget; infeasible-only lists yield the empty
 * sentinel.
 */
PolicySpec solve_les_candidates(const Eigen::VectorXd& objective, const Eigen::MatrixXd& v,
                                const std::vector<std::string>& feature_names,
                                const ManipulationPair& pair,
                                const std::vector<Eigen::VectorXd>& thetas,
                                const Eigen::VectorXd* c1 = nullptr,
                                const Eigen::VectorXd* c0 = nullptr,
                                double kappa = std::numeric_limits<double>::infinity());

}  // namespace ewmiv

#endif
