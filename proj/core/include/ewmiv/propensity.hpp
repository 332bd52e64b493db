#ifndef EWMIV_PROPENSITY_HPP
#define EWMIV_PROPENSITY_HPP

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "ewmiv/dataset.hpp"
#include "ewmiv/features.hpp"
#include "ewmiv/smoothing.hpp"
#include "ewmiv/structural.hpp"
#include "ewmiv/text_config.hpp"

namespace ewmiv {

/**
 * Fitted propensity score. Predictions are always clamped to
 * [trim_eps, 1 - trim_eps] so downstream integrals stay well defined.
 * Fitted models are immutable; predict is reentrant.
 */
class PropensityModel {
public:
    virtual ~PropensityModel() = default;

    double predict(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
    virtual std::string kind() const = 0;
    virtual void save(TextConfig& cfg, const std::string& section) const = 0;

    double trim_eps() const { return trim_eps_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

protected:
    virtual double raw_predict(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const = 0;
    double trim_eps_ = 1e-3;
    std::vector<std::string> warnings_;
};

using PropensityPtr = std::shared_ptr<const PropensityModel>;

class LogitPropensity final : public PropensityModel {
public:
    std::string kind() const override { return "logit"; }
    void save(TextConfig& cfg, const std::string& section) const override;

    const Eigen::VectorXd& coefficients() const { return gamma_; }
    const FeatureMap& features() const { return features_; }
    bool separation_fallback() const { return separation_fallback_; }

private:
    friend LogitPropensity fit_logit(const Sample&, const FeatureMap&, double);
    friend PropensityPtr load_propensity(const TextConfig&, const std::string&, const Sample*);
    double raw_predict(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const override;

    FeatureMap features_;
    Eigen::VectorXd gamma_;
    bool separation_fallback_ = false;
};

/// Memory-based local polynomial regression of d on the non-constant
/// columns of (x, z); the local intercept is kept only where the smallest
/// eigenvalue of the scaled moment matrix exceeds 1/log(n).
class LocalPolyPropensity final : public PropensityModel {
public:
    std::string kind() const override { return "local_poly"; }
    void save(TextConfig& cfg, const std::string& section) const override;

    double bandwidth() const { return bandwidth_; }
    int degree() const { return degree_; }
    /// Local fit without the eigenvalue trim or clamping (diagnostics).
    double predict_untrimmed(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;

private:
    friend LocalPolyPropensity fit_local_poly(const Sample&, int, double, Kernel, double);
    friend PropensityPtr load_propensity(const TextConfig&, const std::string&, const Sample*);
    double raw_predict(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const override;
    Eigen::RowVectorXd scaled_query(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;

    std::vector<ColumnRef> columns_;
    Eigen::VectorXd scale_;     // per-column sd used to normalize distances
    Eigen::MatrixXd points_;    // scaled training design
    Eigen::VectorXd response_;  // d as double
    int degree_ = 1;
    double bandwidth_ = 0.0;
    Kernel kernel_;
    double lambda_threshold_ = 0.0;  // 1/log(n)
};

class SeriesPropensity final : public PropensityModel {
public:
    std::string kind() const override { return "series"; }
    void save(TextConfig& cfg, const std::string& section) const override;

    const Eigen::VectorXd& coefficients() const { return coefs_; }
    bool rank_deficient() const { return rank_deficient_; }
    /// zeta_k * lambda_k proxy: max basis row norm times 1/sqrt(min
    /// eigenvalue of the sample Gram matrix).
    double stability_diagnostic() const { return stability_; }

private:
    friend SeriesPropensity fit_series(const Sample&, const std::string&, int, double);
    friend PropensityPtr load_propensity(const TextConfig&, const std::string&, const Sample*);
    double raw_predict(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const override;
    Eigen::VectorXd basis_row(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;

    std::string basis_ = "polynomial";
    std::vector<ColumnRef> columns_;
    Eigen::VectorXd center_, scale_;
    std::vector<std::vector<int>> exponents_;  // polynomial basis
    std::vector<double> knots_;                // spline basis (single column)
    Eigen::VectorXd coefs_;
    bool rank_deficient_ = false;
    double stability_ = 0.0;
};

/// True propensity from a known generating process.
class OraclePropensity final : public PropensityModel {
public:
    explicit OraclePropensity(StructuralDgp dgp, double trim = 1e-3) : dgp_(std::move(dgp)) {
        trim_eps_ = trim;
    }
    std::string kind() const override { return "oracle"; }
    void save(TextConfig& cfg, const std::string& section) const override;

private:
    double raw_predict(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const override {
        return dgp_.propensity(x, z);
    }
    StructuralDgp dgp_;
};

/**
 * Maximum-likelihood logit via damped Newton (step halving until the
 * likelihood improves). Converged when the gradient sup-norm drops below
 * 1e-8, capped at 100 iterations. If the iterates diverge (perfect
 * separation makes the likelihood unbounded) the fit falls back to a
 * ridge-penalized MLE with penalty 1e-8 and records a warning.
 */
LogitPropensity fit_logit(const Sample& sample, const FeatureMap& features,
                          double trim_eps = 1e-3);

LocalPolyPropensity fit_local_poly(const Sample& sample, int degree, double bandwidth,
                                   Kernel kernel = Kernel{}, double trim_eps = 1e-3);

SeriesPropensity fit_series(const Sample& sample, const std::string& basis, int k,
                            double trim_eps = 1e-3);

/// Leave-one-out cross-validated bandwidth for the locally linear fit;
/// ties break toward the larger bandwidth.
double cv_bandwidth(const Sample& sample, const std::vector<double>& candidate_grid,
                    int degree = 1, Kernel kernel = Kernel{});

PropensityPtr load_propensity(const TextConfig& cfg, const std::string& section,
                              const Sample* data = nullptr);

}  // namespace ewmiv

#endif
