#ifndef EWMIV_MTE_HPP
#define EWMIV_MTE_HPP

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "ewmiv/dataset.hpp"
#include "ewmiv/features.hpp"
#include "ewmiv/propensity.hpp"
#include "ewmiv/smoothing.hpp"
#include "ewmiv/structural.hpp"

namespace ewmiv {

struct IdentifiedRange {
    double lo = 0.0;
    double hi = 1.0;
    bool contains(double lo2, double hi2, double tol = 1e-9) const {
        return lo2 >= lo - tol && hi2 <= hi + tol;
    }
};

/**
 * Fitted marginal treatment effect surface. `eval` gives MTE(u, x~) where
 * the covariate vector x~ is assembled from (x, z) by the model's column
 * selector (additional instruments may enter as covariates).
 * `integrate` is the signed integral over u: antisymmetric, additive over
 * adjacent intervals, and zero on empty intervals. Requests outside the
 * identified range raise ExtrapolationError. `conditional_mean` exposes the
 * fitted E[Y | x~, p = u], which the doubly robust scores reuse.
 */
class MteModel {
public:
    virtual ~MteModel() = default;

    virtual double eval(double u, const Eigen::VectorXd& x, const Eigen::VectorXd& z) const = 0;
    virtual double conditional_mean(double u, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& z) const = 0;
    virtual IdentifiedRange identified_range(const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& z) const = 0;
    virtual std::string kind() const = 0;
    virtual void save(TextConfig& cfg, const std::string& section) const = 0;

    double integrate(const Eigen::VectorXd& x, const Eigen::VectorXd& z, double u_lo,
                     double u_hi) const;

protected:
    /// Integral over [lo, hi] with lo <= hi, bounds already range-checked.
    virtual double integrate_sorted(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                    double lo, double hi) const = 0;
};

using MtePtr = std::shared_ptr<const MteModel>;

/// MTE linear in covariates with a polynomial in u:
/// MTE(u, x~) = x~'(beta1 - beta0) + sum_j j eta_j u^{j-1}. Once the
/// coefficient vector is pinned down, the curve is determined on all of
/// [0,1]; the fitted-propensity support is kept only as a diagnostic.
class PolynomialMte final : public MteModel {
public:
    std::string kind() const override { return "polynomial"; }
    double eval(double u, const Eigen::VectorXd& x, const Eigen::VectorXd& z) const override;
    double conditional_mean(double u, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& z) const override;
    IdentifiedRange identified_range(const Eigen::VectorXd&,
                                     const Eigen::VectorXd&) const override {
        return {0.0, 1.0};
    }
    /// Hull of the propensity values used in fitting.
    IdentifiedRange fitted_support() const { return range_; }
    void save(TextConfig& cfg, const std::string& section) const override;

    const Eigen::VectorXd& beta0() const { return beta0_; }
    const Eigen::VectorXd& beta1() const { return beta1_; }
    const Eigen::VectorXd& eta() const { return eta_; }  // eta_2 .. eta_J
    /// Bound on |MTE| over [0,1] x observed covariate box.
    double eval_bound() const { return eval_bound_; }

private:
    friend PolynomialMte fit_polynomial_mte(const Sample&, const PropensityModel&, int,
                                            const ColumnSelector*);
    friend MtePtr load_mte(const TextConfig&, const std::string&, const Sample*,
                           const PropensityModel*);
    double integrate_sorted(const Eigen::VectorXd& x, const Eigen::VectorXd& z, double lo,
                            double hi) const override;

    ColumnSelector covariates_;
    Eigen::VectorXd beta0_, beta1_, eta_;
    IdentifiedRange range_;
    double eval_bound_ = 0.0;
};

/// Semiparametric model: MTE(u, x~) = x~'(beta1 - beta0) + G'(u), with the
/// nonparametric level G fit by locally linear regression pooled over the
/// sample. Integration uses G(u_hi) - G(u_lo) plus the closed-form linear
/// part, avoiding differentiate-then-quadrature error.
class PartiallyLinearMte final : public MteModel {
public:
    std::string kind() const override { return "partially_linear"; }
    double eval(double u, const Eigen::VectorXd& x, const Eigen::VectorXd& z) const override;
    double conditional_mean(double u, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& z) const override;
    IdentifiedRange identified_range(const Eigen::VectorXd&,
                                     const Eigen::VectorXd&) const override {
        return range_;
    }
    void save(TextConfig& cfg, const std::string& section) const override;

    /// Coefficients on the non-constant covariate columns.
    const Eigen::VectorXd& beta0() const { return beta0_; }
    const Eigen::VectorXd& beta1() const { return beta1_; }
    const std::vector<std::string>& coefficient_names() const { return kept_names_; }

    /// Level/derivative of the pooled nonparametric component at u.
    double g_level(double u) const;
    double g_slope(double u) const;

private:
    friend PartiallyLinearMte fit_partially_linear_mte(const Sample&, const PropensityModel&,
                                                       double, const ColumnSelector*);
    friend MtePtr load_mte(const TextConfig&, const std::string&, const Sample*,
                           const PropensityModel*);
    double integrate_sorted(const Eigen::VectorXd& x, const Eigen::VectorXd& z, double lo,
                            double hi) const override;
    Eigen::VectorXd kept_row(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
    LocalLinear1DResult g_fit(double u) const;

    ColumnSelector covariates_;
    std::vector<int> kept_;  // indices of non-constant covariate columns
    std::vector<std::string> kept_names_;
    Eigen::VectorXd beta0_, beta1_;
    std::shared_ptr<SortedSmoother1D> smoother_;
    Eigen::VectorXd g_residual_;  // y - phat x~'b1 - (1-phat) x~'b0
    double bandwidth_ = 0.0;
    IdentifiedRange range_;
};

/// Fully nonparametric local IV: a locally linear surface for
/// g_Y(x~, u) = E[Y | x~, p = u]; the MTE is its u-derivative and integrals
/// are level differences g_Y(x~, u_hi) - g_Y(x~, u_lo).
class LivMte final : public MteModel {
public:
    std::string kind() const override { return "liv"; }
    double eval(double u, const Eigen::VectorXd& x, const Eigen::VectorXd& z) const override;
    double conditional_mean(double u, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& z) const override;
    IdentifiedRange identified_range(const Eigen::VectorXd&,
                                     const Eigen::VectorXd&) const override {
        return range_;
    }
    void save(TextConfig& cfg, const std::string& section) const override;

private:
    friend LivMte fit_liv_mte(const Sample&, const PropensityModel&, double,
                              const ColumnSelector*);
    friend MtePtr load_mte(const TextConfig&, const std::string&, const Sample*,
                           const PropensityModel*);
    double integrate_sorted(const Eigen::VectorXd& x, const Eigen::VectorXd& z, double lo,
                            double hi) const override;
    LocalPolyResult surface_at(double u, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& z) const;

    ColumnSelector covariates_;
    std::vector<int> kept_;
    Eigen::VectorXd scale_;  // per-column sd, last entry for u
    Eigen::MatrixXd points_;  // scaled (x~, u) design
    Eigen::VectorXd response_;
    double bandwidth_ = 0.0;
    Kernel kernel_;
    IdentifiedRange range_;
};

/// Ground-truth MTE of a known generating process, valid on all of [0,1].
class OracleMte final : public MteModel {
public:
    explicit OracleMte(StructuralDgp dgp) : dgp_(std::move(dgp)) {}
    std::string kind() const override { return "oracle"; }
    double eval(double u, const Eigen::VectorXd& x, const Eigen::VectorXd&) const override {
        return oracle_mte(dgp_, u, x);
    }
    double conditional_mean(double u, const Eigen::VectorXd& x,
                            const Eigen::VectorXd&) const override {
        return conditional_outcome_given_p(dgp_, x, u);
    }
    IdentifiedRange identified_range(const Eigen::VectorXd&,
                                     const Eigen::VectorXd&) const override {
        return {0.0, 1.0};
    }
    void save(TextConfig& cfg, const std::string& section) const override;

private:
    double integrate_sorted(const Eigen::VectorXd& x, const Eigen::VectorXd&, double lo,
                            double hi) const override {
        return oracle_mte_integral(dgp_, x, lo, hi);
    }
    StructuralDgp dgp_;
};

/**
 * Least squares of Y on ((1-p)x~', p x~', p^2, ..., p^J) with the fitted
 * propensity as generated regressor. Requires full column rank; on rank
 * deficiency the error names the collinear columns. `covariates` defaults
 * to all x columns; pass extra instrument columns to condition on them.
 */
PolynomialMte fit_polynomial_mte(const Sample& sample, const PropensityModel& p_model, int J,
                                 const ColumnSelector* covariates = nullptr);

/// Double residual regression: (beta1, beta0) from regressing Y-residuals
/// on residuals of (p x~, (1-p) x~) after smoothing everything on p, then a
/// locally linear fit of the remaining component on p.
PartiallyLinearMte fit_partially_linear_mte(const Sample& sample,
                                            const PropensityModel& p_model, double bandwidth,
                                            const ColumnSelector* covariates = nullptr);

LivMte fit_liv_mte(const Sample& sample, const PropensityModel& p_model, double bandwidth,
                   const ColumnSelector* covariates = nullptr);

/// Signed integral of the fitted MTE (thin wrapper over the virtual call).
double integrate_mte(const MteModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                     double u_lo, double u_hi);

MtePtr load_mte(const TextConfig& cfg, const std::string& section, const Sample* data = nullptr,
                const PropensityModel* p_model = nullptr);

}  // namespace ewmiv

#endif
