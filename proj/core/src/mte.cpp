#include "ewmiv/mte.hpp"

#include <algorithm>
#include <cmath>

#include "ewmiv/errors.hpp"

namespace ewmiv {

namespace {

ColumnSelector all_x_columns(const Sample& s) {
    ColumnSelector sel;
    for (int j = 0; j < s.d_x(); ++j) {
        sel.columns.push_back(ColumnRef{ColumnRef::Source::X, j});
    }
    return sel;
}

Eigen::VectorXd predict_all(const Sample& s, const PropensityModel& p_model) {
    Eigen::VectorXd p(s.n());
    for (int i = 0; i < s.n(); ++i) p(i) = p_model.predict(s.x.row(i), s.z.row(i));
    return p;
}

std::vector<int> nonconstant_columns(const Eigen::MatrixXd& m) {
    std::vector<int> kept;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if ((m.col(j).array() - m(0, j)).abs().maxCoeff() > 0) {
            kept.push_back(static_cast<int>(j));
        }
    }
    return kept;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += items[i];
    }
    return out;
}

}  // namespace

double MteModel::integrate(const Eigen::VectorXd& x, const Eigen::VectorXd& z, double u_lo,
                           double u_hi) const {
    const double lo = std::min(u_lo, u_hi);
    const double hi = std::max(u_lo, u_hi);
    const IdentifiedRange range = identified_range(x, z);
    if (!range.contains(lo, hi)) {
        throw ExtrapolationError("MTE integration range [" + format_num(lo) + ", " +
                                 format_num(hi) + "] outside identified range [" +
                                 format_num(range.lo) + ", " + format_num(range.hi) + "]");
    }
    if (u_lo == u_hi) return 0.0;
    const double value = integrate_sorted(x, z, lo, hi);
    return (u_lo <= u_hi) ? value : -value;
}

double integrate_mte(const MteModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                     double u_lo, double u_hi) {
    return model.integrate(x, z, u_lo, u_hi);
}

// ---------------------------------------------------------------------------
// Polynomial model

double PolynomialMte::eval(double u, const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    const Eigen::VectorXd xt = covariates_.row(x, z);
    double slope_part = 0.0;
    for (Eigen::Index j = 0; j < eta_.size(); ++j) {
        slope_part += static_cast<double>(j + 2) * eta_(j) * std::pow(u, static_cast<double>(j + 1));
    }
    return xt.dot(beta1_ - beta0_) + slope_part;
}

double PolynomialMte::conditional_mean(double u, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& z) const {
    const Eigen::VectorXd xt = covariates_.row(x, z);
    double poly = 0.0;
    for (Eigen::Index j = 0; j < eta_.size(); ++j) {
        poly += eta_(j) * std::pow(u, static_cast<double>(j + 2));
    }
    return u * xt.dot(beta1_) + (1.0 - u) * xt.dot(beta0_) + poly;
}

double PolynomialMte::integrate_sorted(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                       double lo, double hi) const {
    const Eigen::VectorXd xt = covariates_.row(x, z);
    // Antiderivative of sum_j j eta_j u^{j-1} is sum_j eta_j u^j.
    double poly = 0.0;
    for (Eigen::Index j = 0; j < eta_.size(); ++j) {
        const double e = static_cast<double>(j + 2);
        poly += eta_(j) * (std::pow(hi, e) - std::pow(lo, e));
    }
    return (hi - lo) * xt.dot(beta1_ - beta0_) + poly;
}

void PolynomialMte::save(TextConfig& cfg, const std::string& section) const {
    cfg.set(section, "kind", "polynomial");
    cfg.set(section, "covariates", join(covariates_.names()));
    cfg.set_num_list(section, "beta0",
                     std::vector<double>(beta0_.data(), beta0_.data() + beta0_.size()));
    cfg.set_num_list(section, "beta1",
                     std::vector<double>(beta1_.data(), beta1_.data() + beta1_.size()));
    cfg.set_num_list(section, "eta",
                     std::vector<double>(eta_.data(), eta_.data() + eta_.size()));
    cfg.set_num(section, "support_lo", range_.lo);
    cfg.set_num(section, "support_hi", range_.hi);
}

PolynomialMte fit_polynomial_mte(const Sample& sample, const PropensityModel& p_model, int J,
                                 const ColumnSelector* covariates) {
    sample.validate();
    if (J < 2) throw ConfigError("polynomial MTE needs degree J >= 2");

    PolynomialMte model;
    model.covariates_ = covariates ? *covariates : all_x_columns(sample);
    const Eigen::MatrixXd xt = model.covariates_.matrix(sample.x, sample.z);
    const int m = static_cast<int>(xt.cols());
    const Eigen::VectorXd p = predict_all(sample, p_model);

    const int cols = 2 * m + (J - 1);
    Eigen::MatrixXd w(sample.n(), cols);
    std::vector<std::string> names;
    for (int j = 0; j < m; ++j) {
        w.col(j) = (1.0 - p.array()) * xt.col(j).array();
        names.push_back("p0*" + model.covariates_.names()[static_cast<std::size_t>(j)]);
    }
    for (int j = 0; j < m; ++j) {
        w.col(m + j) = p.array() * xt.col(j).array();
        names.push_back("p1*" + model.covariates_.names()[static_cast<std::size_t>(j)]);
    }
    for (int j = 2; j <= J; ++j) {
        w.col(2 * m + j - 2) = p.array().pow(j);
        names.push_back("p^" + std::to_string(j));
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(w);
    qr.setThreshold(1e-10);
    if (qr.rank() < cols) {
        std::vector<std::string> collinear;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index j = qr.rank(); j < cols; ++j) {
            collinear.push_back(names[static_cast<std::size_t>(perm(j))]);
        }
        throw EstimationError("polynomial MTE design is rank deficient; collinear columns: " +
                              join(collinear));
    }
    const Eigen::VectorXd theta = qr.solve(sample.y);

    model.beta0_ = theta.segment(0, m);
    model.beta1_ = theta.segment(m, m);
    model.eta_ = theta.segment(2 * m, J - 1);
    model.range_ = {p.minCoeff(), p.maxCoeff()};

    double slope_max = 0.0;
    for (int g = 0; g <= 64; ++g) {
        const double u = static_cast<double>(g) / 64.0;
        double s = 0.0;
        for (Eigen::Index j = 0; j < model.eta_.size(); ++j) {
            s += static_cast<double>(j + 2) * model.eta_(j) * std::pow(u, static_cast<double>(j + 1));
        }
        slope_max = std::max(slope_max, std::abs(s));
    }
    double linear_max = 0.0;
    for (int i = 0; i < sample.n(); ++i) {
        linear_max = std::max(linear_max,
                              std::abs(xt.row(i).dot((model.beta1_ - model.beta0_).transpose())));
    }
    model.eval_bound_ = linear_max + slope_max;
    return model;
}

// ---------------------------------------------------------------------------
// Partially linear model

Eigen::VectorXd PartiallyLinearMte::kept_row(const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& z) const {
    const Eigen::VectorXd full = covariates_.row(x, z);
    Eigen::VectorXd out(static_cast<long>(kept_.size()));
    for (std::size_t j = 0; j < kept_.size(); ++j) out(static_cast<long>(j)) = full(kept_[j]);
    return out;
}

LocalLinear1DResult PartiallyLinearMte::g_fit(double u) const {
    LocalLinear1DResult res = smoother_->at(u, g_residual_);
    if (res.effective_n < 10) {
        res = smoother_->at(u, g_residual_, 2.0 * bandwidth_);  // widened retry
        if (res.effective_n < 10) {
            throw EstimationError("fewer than 10 effective observations near u = " +
                                  format_num(u) + " even after widening the bandwidth");
        }
    }
    return res;
}

double PartiallyLinearMte::g_level(double u) const { return g_fit(u).level; }
double PartiallyLinearMte::g_slope(double u) const { return g_fit(u).slope; }

double PartiallyLinearMte::eval(double u, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& z) const {
    return kept_row(x, z).dot(beta1_ - beta0_) + g_slope(u);
}

double PartiallyLinearMte::conditional_mean(double u, const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& z) const {
    const Eigen::VectorXd xt = kept_row(x, z);
    return u * xt.dot(beta1_) + (1.0 - u) * xt.dot(beta0_) + g_level(u);
}

double PartiallyLinearMte::integrate_sorted(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                            double lo, double hi) const {
    return (hi - lo) * kept_row(x, z).dot(beta1_ - beta0_) + g_level(hi) - g_level(lo);
}

void PartiallyLinearMte::save(TextConfig& cfg, const std::string& section) const {
    cfg.set(section, "kind", "partially_linear");
    cfg.set(section, "covariates", join(covariates_.names()));
    cfg.set_num(section, "bandwidth", bandwidth_);
    cfg.set(section, "coefficient_columns", join(kept_names_));
    cfg.set_num_list(section, "beta0",
                     std::vector<double>(beta0_.data(), beta0_.data() + beta0_.size()));
    cfg.set_num_list(section, "beta1",
                     std::vector<double>(beta1_.data(), beta1_.data() + beta1_.size()));
    cfg.set(section, "data_bound", "true");
}

PartiallyLinearMte fit_partially_linear_mte(const Sample& sample,
                                            const PropensityModel& p_model, double bandwidth,
                                            const ColumnSelector* covariates) {
    sample.validate();
    if (bandwidth <= 0) throw ConfigError("partially linear MTE bandwidth must be positive");

    PartiallyLinearMte model;
    model.covariates_ = covariates ? *covariates : all_x_columns(sample);
    model.bandwidth_ = bandwidth;
    const Eigen::MatrixXd full = model.covariates_.matrix(sample.x, sample.z);
    model.kept_ = nonconstant_columns(full);
    for (int j : model.kept_) {
        model.kept_names_.push_back(model.covariates_.names()[static_cast<std::size_t>(j)]);
    }
    const int m = static_cast<int>(model.kept_.size());
    Eigen::MatrixXd xt(sample.n(), m);
    for (int j = 0; j < m; ++j) xt.col(j) = full.col(model.kept_[static_cast<std::size_t>(j)]);

    const Eigen::VectorXd p = predict_all(sample, p_model);
    model.smoother_ = std::make_shared<SortedSmoother1D>(p, bandwidth);

    // Residualize the outcome and the interacted covariates on the fitted
    // propensity, then regress residuals on residuals.
    Eigen::MatrixXd reg(sample.n(), 2 * m);
    for (int j = 0; j < m; ++j) {
        reg.col(j) = p.array() * xt.col(j).array();            // beta1 block
        reg.col(m + j) = (1.0 - p.array()) * xt.col(j).array();  // beta0 block
    }
    Eigen::MatrixXd stacked(sample.n(), 2 * m + 1);
    stacked.col(0) = sample.y;
    stacked.rightCols(2 * m) = reg;
    const Eigen::MatrixXd smoothed = model.smoother_->fitted(stacked);
    const Eigen::VectorXd ey = sample.y - smoothed.col(0);
    const Eigen::MatrixXd er = reg - smoothed.rightCols(2 * m);

    if (m > 0) {
        const Eigen::MatrixXd mom = er.transpose() * er / sample.n();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mom);
        if (eig.eigenvalues().minCoeff() <
            1e-10 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
            throw EstimationError(
                "double residual regression: residual second-moment matrix is singular "
                "(covariates carry no variation independent of the propensity)");
        }
        const Eigen::VectorXd b = (er.transpose() * er).ldlt().solve(er.transpose() * ey);
        model.beta1_ = b.segment(0, m);
        model.beta0_ = b.segment(m, m);
    } else {
        model.beta0_.resize(0);
        model.beta1_.resize(0);
    }

    Eigen::VectorXd fitted_linear = Eigen::VectorXd::Zero(sample.n());
    if (m > 0) {
        fitted_linear = (p.array() * (xt * model.beta1_).array() +
                         (1.0 - p.array()) * (xt * model.beta0_).array())
                            .matrix();
    }
    model.g_residual_ = sample.y - fitted_linear;
    model.range_ = {p.minCoeff(), p.maxCoeff()};
    return model;
}

// ---------------------------------------------------------------------------
// Local IV model

LocalPolyResult LivMte::surface_at(double u, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& z) const {
    const Eigen::VectorXd full = covariates_.row(x, z);
    const int m = static_cast<int>(kept_.size());
    Eigen::RowVectorXd q(m + 1);
    for (int j = 0; j < m; ++j) {
        q(j) = full(kept_[static_cast<std::size_t>(j)]) / scale_(j);
    }
    q(m) = u / scale_(m);
    const auto res = local_poly_at(points_, response_, q, 1, bandwidth_, kernel_);
    if (res.effective_n == 0 || !std::isfinite(res.value)) {
        throw EstimationError("LIV surface has no support near u = " + format_num(u));
    }
    return res;
}

double LivMte::eval(double u, const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    const auto res = surface_at(u, x, z);
    const int m = static_cast<int>(kept_.size());
    return res.gradient(m) / scale_(m);
}

double LivMte::conditional_mean(double u, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& z) const {
    return surface_at(u, x, z).value;
}

double LivMte::integrate_sorted(const Eigen::VectorXd& x, const Eigen::VectorXd& z, double lo,
                                double hi) const {
    return surface_at(hi, x, z).value - surface_at(lo, x, z).value;
}

void LivMte::save(TextConfig& cfg, const std::string& section) const {
    cfg.set(section, "kind", "liv");
    cfg.set(section, "covariates", join(covariates_.names()));
    cfg.set_num(section, "bandwidth", bandwidth_);
    cfg.set(section, "kernel", kernel_.to_string());
    cfg.set_num(section, "range_lo", range_.lo);
    cfg.set_num(section, "range_hi", range_.hi);
    cfg.set(section, "data_bound", "true");
}

LivMte fit_liv_mte(const Sample& sample, const PropensityModel& p_model, double bandwidth,
                   const ColumnSelector* covariates) {
    sample.validate();
    if (bandwidth <= 0) throw ConfigError("LIV bandwidth must be positive");

    const Eigen::VectorXd p = predict_all(sample, p_model);
    std::vector<double> sorted_p(p.data(), p.data() + p.size());
    std::sort(sorted_p.begin(), sorted_p.end());
    int distinct = 1;
    for (std::size_t i = 1; i < sorted_p.size(); ++i) {
        if (sorted_p[i] != sorted_p[i - 1]) ++distinct;
    }
    if (distinct < 30) {
        throw IdentificationError(
            "LIV needs continuous variation in the fitted propensity (got " +
            std::to_string(distinct) +
            " distinct values); use the partially linear or polynomial MTE model instead");
    }

    LivMte model;
    model.covariates_ = covariates ? *covariates : all_x_columns(sample);
    model.bandwidth_ = bandwidth;
    const Eigen::MatrixXd full = model.covariates_.matrix(sample.x, sample.z);
    model.kept_ = nonconstant_columns(full);
    const int m = static_cast<int>(model.kept_.size());

    model.points_.resize(sample.n(), m + 1);
    model.scale_.resize(m + 1);
    for (int j = 0; j < m; ++j) {
        const Eigen::VectorXd col = full.col(model.kept_[static_cast<std::size_t>(j)]);
        const double range = col.maxCoeff() - col.minCoeff();
        model.scale_(j) = (range > 0) ? range : 1.0;
        model.points_.col(j) = col / model.scale_(j);
    }
    const double p_range = p.maxCoeff() - p.minCoeff();
    model.scale_(m) = (p_range > 0) ? p_range : 1.0;
    model.points_.col(m) = p / model.scale_(m);
    model.response_ = sample.y;

    // Interior of the propensity support; boundary strips are dropped to
    // avoid one-sided smoothing bias.
    const auto quant = [&](double q) {
        const double pos = q * (static_cast<double>(sorted_p.size()) - 1);
        const std::size_t k = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(k);
        return (k + 1 < sorted_p.size()) ? sorted_p[k] * (1 - frac) + sorted_p[k + 1] * frac
                                         : sorted_p[k];
    };
    model.range_ = {quant(0.02), quant(0.98)};
    return model;
}

// ---------------------------------------------------------------------------

void OracleMte::save(TextConfig& cfg, const std::string& section) const {
    cfg.set(section, "kind", "oracle");
    dgp_.to_config(cfg, section + ".dgp");
}

MtePtr load_mte(const TextConfig& cfg, const std::string& section, const Sample* data,
                const PropensityModel* p_model) {
    const std::string kind = cfg.str(section, "kind");
    if (kind == "polynomial") {
        auto model = std::make_shared<PolynomialMte>();
        model->covariates_ = ColumnSelector::parse(cfg.str_list(section, "covariates"));
        const auto b0 = cfg.num_list(section, "beta0");
        const auto b1 = cfg.num_list(section, "beta1");
        const auto eta = cfg.num_list(section, "eta");
        model->beta0_ =
            Eigen::Map<const Eigen::VectorXd>(b0.data(), static_cast<long>(b0.size()));
        model->beta1_ =
            Eigen::Map<const Eigen::VectorXd>(b1.data(), static_cast<long>(b1.size()));
        model->eta_ =
            Eigen::Map<const Eigen::VectorXd>(eta.data(), static_cast<long>(eta.size()));
        model->range_ = {cfg.num_or(section, "support_lo", 0.0),
                         cfg.num_or(section, "support_hi", 1.0)};
        return model;
    }
    if (kind == "partially_linear") {
        if (!data || !p_model) {
            throw ConfigError("partially_linear MTE is data-bound; supply sample and "
                              "propensity model when loading");
        }
        const auto sel = ColumnSelector::parse(cfg.str_list(section, "covariates"));
        return std::make_shared<PartiallyLinearMte>(
            fit_partially_linear_mte(*data, *p_model, cfg.num(section, "bandwidth"), &sel));
    }
    if (kind == "liv") {
        if (!data || !p_model) {
            throw ConfigError("liv MTE is data-bound; supply sample and propensity model "
                              "when loading");
        }
        const auto sel = ColumnSelector::parse(cfg.str_list(section, "covariates"));
        return std::make_shared<LivMte>(
            fit_liv_mte(*data, *p_model, cfg.num(section, "bandwidth"), &sel));
    }
    if (kind == "oracle") {
        return std::make_shared<OracleMte>(StructuralDgp::from_config(cfg, section + ".dgp"));
    }
    throw ConfigError("unknown MTE kind '" + kind + "'");
}

}  // namespace ewmiv
