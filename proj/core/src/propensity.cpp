#include "ewmiv/propensity.hpp"

#include <algorithm>
#include <cmath>

#include "ewmiv/errors.hpp"

namespace ewmiv {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

/// Non-constant (x, z) columns in order, skipping zero-variance ones.
std::vector<ColumnRef> continuous_design_columns(const Sample& s) {
    std::vector<ColumnRef> cols;
    auto push_if_varying = [&](ColumnRef::Source src, int idx, const Eigen::VectorXd& col) {
        if ((col.array() - col(0)).abs().maxCoeff() > 0) {
            cols.push_back(ColumnRef{src, idx});
        }
    };
    for (int j = 0; j < s.d_x(); ++j) push_if_varying(ColumnRef::Source::X, j, s.x.col(j));
    for (int j = 0; j < s.d_z(); ++j) push_if_varying(ColumnRef::Source::Z, j, s.z.col(j));
    if (cols.empty()) throw ConfigError("all (x,z) columns are constant");
    return cols;
}

Eigen::MatrixXd select_columns(const Sample& s, const std::vector<ColumnRef>& cols) {
    Eigen::MatrixXd out(s.n(), static_cast<long>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto& c = cols[j];
        out.col(static_cast<long>(j)) =
            (c.source == ColumnRef::Source::X) ? s.x.col(c.index) : s.z.col(c.index);
    }
    return out;
}

std::vector<std::string> column_names(const std::vector<ColumnRef>& cols) {
    std::vector<std::string> out;
    out.reserve(cols.size());
    for (const auto& c : cols) out.push_back(c.to_string());
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += items[i];
    }
    return out;
}

struct LogitFit {
    Eigen::VectorXd gamma;
    bool diverged = false;
};

double logit_loglik(const Eigen::MatrixXd& phi, const Eigen::VectorXd& d,
                    const Eigen::VectorXd& gamma, double ridge) {
    const Eigen::VectorXd eta = phi * gamma;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // log(1 + e^eta) computed stably.
        const double e = eta(i);
        const double log1pexp = (e > 30) ? e : std::log1p(std::exp(e));
        ll += d(i) * e - log1pexp;
    }
    return ll - 0.5 * ridge * gamma.squaredNorm();
}

LogitFit newton_logit(const Eigen::MatrixXd& phi, const Eigen::VectorXd& d, double ridge) {
    const Eigen::Index p = phi.cols();
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p);
    double ll = logit_loglik(phi, d, gamma, ridge);
    LogitFit fit;

    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::VectorXd eta = phi * gamma;
        Eigen::VectorXd mu(eta.size()), w(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            mu(i) = logistic(eta(i));
            w(i) = mu(i) * (1.0 - mu(i));
        }
        Eigen::VectorXd grad = phi.transpose() * (d - mu) - ridge * gamma;
        if (grad.lpNorm<Eigen::Infinity>() < 1e-8) break;

        Eigen::MatrixXd hess = phi.transpose() * w.asDiagonal() * phi;
        hess.diagonal().array() += ridge;
        Eigen::VectorXd step = hess.ldlt().solve(grad);
        if (!step.allFinite()) {
            fit.diverged = true;
            break;
        }

        double scale = 1.0;
        Eigen::VectorXd next = gamma + step;
        double next_ll = logit_loglik(phi, d, next, ridge);
        int halvings = 0;
        while (next_ll < ll && halvings < 30) {
            scale *= 0.5;
            next = gamma + scale * step;
            next_ll = logit_loglik(phi, d, next, ridge);
            ++halvings;
        }
        gamma = next;
        ll = next_ll;

        // Unpenalized iterates drifting this far (on standardized features)
        // indicate an unbounded likelihood; the penalized problem is always
        // bounded, so no check is needed there.
        if (ridge == 0.0 && gamma.lpNorm<Eigen::Infinity>() > 15.0) {
            fit.diverged = true;
            break;
        }
    }
    fit.gamma = gamma;
    if (!gamma.allFinite()) fit.diverged = true;
    if (ridge == 0.0 && gamma.lpNorm<Eigen::Infinity>() > 15.0) fit.diverged = true;
    return fit;
}

}  // namespace

double PropensityModel::predict(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    const double p = raw_predict(x, z);
    return std::min(1.0 - trim_eps_, std::max(trim_eps_, p));
}

// ---------------------------------------------------------------------------
// Logit

double LogitPropensity::raw_predict(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    return logistic(gamma_.dot(features_.row(x, z)));
}

void LogitPropensity::save(TextConfig& cfg, const std::string& section) const {
    cfg.set(section, "kind", "logit");
    cfg.set_num(section, "trim_eps", trim_eps_);
    cfg.set(section, "features", join(features_.term_names()));
    cfg.set_num_list(section, "coefficients",
                     std::vector<double>(gamma_.data(), gamma_.data() + gamma_.size()));
    cfg.set(section, "separation_fallback", separation_fallback_ ? "true" : "false");
}

LogitPropensity fit_logit(const Sample& sample, const FeatureMap& features, double trim_eps) {
    sample.validate();
    const Eigen::MatrixXd raw = features.design(sample.x, sample.z);
    if (sample.n() <= raw.cols()) {
        throw ConfigError("logit needs more observations than features (n=" +
                          std::to_string(sample.n()) + ", p=" + std::to_string(raw.cols()) + ")");
    }

    // Standardize non-constant columns; the MLE is invariant to this, and it
    // makes the divergence threshold scale-free. Coefficients are mapped
    // back to the original scale afterwards.
    const Eigen::Index p = raw.cols();
    Eigen::VectorXd center = Eigen::VectorXd::Zero(p), scale = Eigen::VectorXd::Ones(p);
    int intercept_col = -1;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double mean = raw.col(j).mean();
        const double sd = std::sqrt((raw.col(j).array() - mean).square().sum() /
                                    std::max(1, sample.n() - 1));
        if (sd == 0.0) {
            if (intercept_col < 0 && mean != 0.0) intercept_col = static_cast<int>(j);
            continue;
        }
        center(j) = mean;
        scale(j) = sd;
    }
    const bool can_center = intercept_col >= 0;
    Eigen::MatrixXd phi = raw;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (scale(j) == 1.0 && center(j) == 0.0) continue;
        phi.col(j) = (raw.col(j).array() - (can_center ? center(j) : 0.0)) / scale(j);
    }

    const Eigen::VectorXd d = sample.d.cast<double>();
    LogitFit fit = newton_logit(phi, d, 0.0);
    LogitPropensity model;
    if (fit.diverged) {
        fit = newton_logit(phi, d, 1e-8);
        model.separation_fallback_ = true;
        model.warnings_.push_back(
            "likelihood unbounded (perfect separation); ridge-penalized fit used");
    }

    // Undo standardization.
    Eigen::VectorXd gamma = fit.gamma;
    double intercept_shift = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (scale(j) == 1.0 && center(j) == 0.0) continue;
        gamma(j) = fit.gamma(j) / scale(j);
        if (can_center) intercept_shift += fit.gamma(j) * center(j) / scale(j);
    }
    if (can_center && intercept_shift != 0.0) {
        gamma(intercept_col) -= intercept_shift / raw.col(intercept_col).mean();
    }

    model.features_ = features;
    model.gamma_ = gamma;
    model.trim_eps_ = trim_eps;
    return model;
}

// ---------------------------------------------------------------------------
// Local polynomial

Eigen::RowVectorXd LocalPolyPropensity::scaled_query(const Eigen::VectorXd& x,
                                                     const Eigen::VectorXd& z) const {
    Eigen::RowVectorXd q(static_cast<long>(columns_.size()));
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        q(static_cast<long>(j)) = columns_[j].value(x, z) / scale_(static_cast<long>(j));
    }
    return q;
}

double LocalPolyPropensity::raw_predict(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& z) const {
    const auto res =
        local_poly_at(points_, response_, scaled_query(x, z), degree_, bandwidth_, kernel_);
    return (res.lambda_min >= lambda_threshold_) ? res.value : 0.0;
}

double LocalPolyPropensity::predict_untrimmed(const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& z) const {
    return local_poly_at(points_, response_, scaled_query(x, z), degree_, bandwidth_, kernel_)
        .value;
}

void LocalPolyPropensity::save(TextConfig& cfg, const std::string& section) const {
    cfg.set(section, "kind", "local_poly");
    cfg.set_num(section, "trim_eps", trim_eps_);
    cfg.set_num(section, "degree", degree_);
    cfg.set_num(section, "bandwidth", bandwidth_);
    cfg.set(section, "kernel", kernel_.to_string());
    cfg.set(section, "columns", join(column_names(columns_)));
    cfg.set(section, "data_bound", "true");  // reload requires the sample
}

LocalPolyPropensity fit_local_poly(const Sample& sample, int degree, double bandwidth,
                                   Kernel kernel, double trim_eps) {
    sample.validate();
    if (bandwidth <= 0) throw ConfigError("local polynomial bandwidth must be positive");
    if (degree < 0) throw ConfigError("local polynomial degree must be nonnegative");

    LocalPolyPropensity model;
    model.columns_ = continuous_design_columns(sample);
    Eigen::MatrixXd pts = select_columns(sample, model.columns_);
    model.scale_.resize(pts.cols());
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        // Unit-range scaling keeps the design density O(1), so the
        // 1/log(n) eigenvalue threshold only trims genuinely empty regions.
        const double range = pts.col(j).maxCoeff() - pts.col(j).minCoeff();
        model.scale_(j) = (range > 0) ? range : 1.0;
        pts.col(j) /= model.scale_(j);
    }
    model.points_ = std::move(pts);
    model.response_ = sample.d.cast<double>();
    model.degree_ = degree;
    model.bandwidth_ = bandwidth;
    model.kernel_ = kernel;
    model.lambda_threshold_ = 1.0 / std::log(static_cast<double>(std::max(3, sample.n())));
    model.trim_eps_ = trim_eps;
    return model;
}

// ---------------------------------------------------------------------------
// Series

Eigen::VectorXd SeriesPropensity::basis_row(const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& z) const {
    Eigen::VectorXd t(static_cast<long>(columns_.size()));
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        t(static_cast<long>(j)) =
            (columns_[j].value(x, z) - center_(static_cast<long>(j))) /
            scale_(static_cast<long>(j));
    }
    if (basis_ == "polynomial") {
        Eigen::VectorXd row(static_cast<long>(exponents_.size()));
        for (std::size_t m = 0; m < exponents_.size(); ++m) {
            double v = 1.0;
            for (std::size_t j = 0; j < exponents_[m].size(); ++j) {
                for (int r = 0; r < exponents_[m][j]; ++r) v *= t(static_cast<long>(j));
            }
            row(static_cast<long>(m)) = v;
        }
        return row;
    }
    // Cubic truncated-power spline over a single column.
    Eigen::VectorXd row(4 + static_cast<long>(knots_.size()));
    const double u = t(0);
    row(0) = 1.0;
    row(1) = u;
    row(2) = u * u;
    row(3) = u * u * u;
    for (std::size_t m = 0; m < knots_.size(); ++m) {
        const double s = u - knots_[m];
        row(4 + static_cast<long>(m)) = (s > 0) ? s * s * s : 0.0;
    }
    return row;
}

double SeriesPropensity::raw_predict(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    return coefs_.dot(basis_row(x, z));
}

void SeriesPropensity::save(TextConfig& cfg, const std::string& section) const {
    cfg.set(section, "kind", "series");
    cfg.set_num(section, "trim_eps", trim_eps_);
    cfg.set(section, "basis", basis_);
    cfg.set(section, "columns", join(column_names(columns_)));
    cfg.set_num_list(section, "center",
                     std::vector<double>(center_.data(), center_.data() + center_.size()));
    cfg.set_num_list(section, "scale",
                     std::vector<double>(scale_.data(), scale_.data() + scale_.size()));
    if (basis_ == "polynomial") {
        std::vector<std::string> exp_strings;
        for (const auto& e : exponents_) {
            std::string s;
            for (std::size_t j = 0; j < e.size(); ++j) {
                if (j) s += ":";
                s += std::to_string(e[j]);
            }
            exp_strings.push_back(s);
        }
        cfg.set(section, "exponents", join(exp_strings));
    } else {
        cfg.set_num_list(section, "knots", knots_);
    }
    cfg.set_num_list(section, "coefficients",
                     std::vector<double>(coefs_.data(), coefs_.data() + coefs_.size()));
    cfg.set(section, "rank_deficient", rank_deficient_ ? "true" : "false");
    cfg.set_num(section, "stability", stability_);
}

SeriesPropensity fit_series(const Sample& sample, const std::string& basis, int k,
                            double trim_eps) {
    sample.validate();
    if (k < 1) throw ConfigError("series term count k must be positive");
    if (k > sample.n()) {
        throw ConfigError("series term count k=" + std::to_string(k) + " exceeds n=" +
                          std::to_string(sample.n()));
    }

    SeriesPropensity model;
    model.basis_ = basis;
    model.trim_eps_ = trim_eps;
    model.columns_ = continuous_design_columns(sample);
    const Eigen::MatrixXd raw = select_columns(sample, model.columns_);
    const Eigen::Index d = raw.cols();
    model.center_.resize(d);
    model.scale_.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        model.center_(j) = raw.col(j).mean();
        const double sd = std::sqrt((raw.col(j).array() - model.center_(j)).square().sum() /
                                    std::max(1, sample.n() - 1));
        model.scale_(j) = (sd > 0) ? sd : 1.0;
    }

    if (basis == "polynomial") {
        for (int degree = 0; degree <= 12; ++degree) {
            const auto exps = monomial_exponents(static_cast<int>(d), degree);
            if (static_cast<int>(exps.size()) >= k) {
                model.exponents_.assign(exps.begin(), exps.begin() + k);
                break;
            }
        }
        if (static_cast<int>(model.exponents_.size()) != k) {
            throw ConfigError("polynomial basis cannot reach k=" + std::to_string(k) + " terms");
        }
    } else if (basis == "spline") {
        if (d != 1) {
            throw ConfigError("spline basis supports a single continuous regressor; use "
                              "basis=polynomial for multivariate fits");
        }
        if (k < 5) throw ConfigError("spline basis needs k >= 5");
        std::vector<double> sorted(raw.data(), raw.data() + raw.rows());
        std::sort(sorted.begin(), sorted.end());
        const int n_knots = k - 4;
        for (int m = 1; m <= n_knots; ++m) {
            const double frac = static_cast<double>(m) / (n_knots + 1);
            double q = sorted[static_cast<std::size_t>(frac * (sorted.size() - 1))];
            model.knots_.push_back((q - model.center_(0)) / model.scale_(0));
        }
    } else {
        throw ConfigError("unknown series basis '" + basis + "'");
    }

    Eigen::MatrixXd design(sample.n(), k);
    for (int i = 0; i < sample.n(); ++i) {
        design.row(i) = model.basis_row(sample.x.row(i), sample.z.row(i)).transpose();
    }

    // Moore-Penrose least squares; duplicated basis columns collapse to the
    // minimum-norm solution with unchanged fitted values.
    Eigen::BDCSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double tol = std::max(sample.n(), k) * svd.singularValues()(0) * 1e-14;
    int rank = 0;
    for (Eigen::Index j = 0; j < svd.singularValues().size(); ++j) {
        if (svd.singularValues()(j) > tol) ++rank;
    }
    model.rank_deficient_ = rank < k;
    if (model.rank_deficient_) {
        model.warnings_.push_back("series basis rank " + std::to_string(rank) + " < k=" +
                                  std::to_string(k) + "; pseudo-inverse used");
    }
    model.coefs_ = svd.solve(sample.d.cast<double>());

    const double zeta = design.rowwise().norm().maxCoeff();
    const double lambda_min_gram =
        svd.singularValues()(svd.singularValues().size() - 1) > 0
            ? std::pow(svd.singularValues()(std::min<Eigen::Index>(rank, k) - 1), 2) / sample.n()
            : 0.0;
    model.stability_ = (lambda_min_gram > 0) ? zeta / std::sqrt(lambda_min_gram) : 0.0;
    return model;
}

// ---------------------------------------------------------------------------

void OraclePropensity::save(TextConfig& cfg, const std::string& section) const {
    cfg.set(section, "kind", "oracle");
    cfg.set_num(section, "trim_eps", trim_eps_);
    dgp_.to_config(cfg, section + ".dgp");
}

double cv_bandwidth(const Sample& sample, const std::vector<double>& candidate_grid, int degree,
                    Kernel kernel) {
    sample.validate();
    if (candidate_grid.empty()) throw ConfigError("bandwidth grid is empty");
    for (double h : candidate_grid) {
        if (h <= 0) throw ConfigError("bandwidth candidates must be positive");
    }
    std::vector<double> grid = candidate_grid;
    std::sort(grid.begin(), grid.end());

    const auto cols = continuous_design_columns(sample);
    Eigen::MatrixXd pts = select_columns(sample, cols);
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        const double range = pts.col(j).maxCoeff() - pts.col(j).minCoeff();
        if (range > 0) pts.col(j) /= range;
    }
    const Eigen::VectorXd resp = sample.d.cast<double>();
    const int n = sample.n();

    double best_h = grid.front();
    double best_err = std::numeric_limits<double>::infinity();
    std::vector<int> keep(static_cast<std::size_t>(n - 1));
    for (double h : grid) {
        double err = 0.0;
        Eigen::MatrixXd others(n - 1, pts.cols());
        Eigen::VectorXd others_y(n - 1);
        for (int i = 0; i < n; ++i) {
            int r = 0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                others.row(r) = pts.row(j);
                others_y(r) = resp(j);
                ++r;
            }
            const auto fit = local_poly_at(others, others_y, pts.row(i), degree, h, kernel);
            const double pred = std::min(1.0, std::max(0.0, fit.value));
            err += (resp(i) - pred) * (resp(i) - pred);
        }
        if (err <= best_err) {  // grid ascending: ties go to the larger h
            best_err = err;
            best_h = h;
        }
    }
    return best_h;
}

PropensityPtr load_propensity(const TextConfig& cfg, const std::string& section,
                              const Sample* data) {
    const std::string kind = cfg.str(section, "kind");
    const double trim = cfg.num_or(section, "trim_eps", 1e-3);
    if (kind == "logit") {
        auto model = std::make_shared<LogitPropensity>();
        model->features_ = FeatureMap::parse(cfg.str_list(section, "features"));
        const auto g = cfg.num_list(section, "coefficients");
        model->gamma_ = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<long>(g.size()));
        model->trim_eps_ = trim;
        model->separation_fallback_ = cfg.flag_or(section, "separation_fallback", false);
        return model;
    }
    if (kind == "local_poly") {
        if (!data) {
            throw ConfigError("local_poly propensity is data-bound; supply the sample when "
                              "loading");
        }
        return std::make_shared<LocalPolyPropensity>(
            fit_local_poly(*data, static_cast<int>(cfg.num(section, "degree")),
                           cfg.num(section, "bandwidth"),
                           Kernel::parse(cfg.str_or(section, "kernel", "gaussian")), trim));
    }
    if (kind == "series") {
        auto model = std::make_shared<SeriesPropensity>();
        model->basis_ = cfg.str(section, "basis");
        model->columns_.clear();
        for (const auto& c : cfg.str_list(section, "columns")) {
            model->columns_.push_back(ColumnRef::parse(c));
        }
        const auto center = cfg.num_list(section, "center");
        const auto scale = cfg.num_list(section, "scale");
        model->center_ =
            Eigen::Map<const Eigen::VectorXd>(center.data(), static_cast<long>(center.size()));
        model->scale_ =
            Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<long>(scale.size()));
        if (model->basis_ == "polynomial") {
            for (const auto& s : cfg.str_list(section, "exponents")) {
                std::vector<int> e;
                std::size_t pos = 0;
                while (pos <= s.size()) {
                    const std::size_t next = s.find(':', pos);
                    e.push_back(std::stoi(s.substr(pos, next - pos)));
                    if (next == std::string::npos) break;
                    pos = next + 1;
                }
                model->exponents_.push_back(e);
            }
        } else {
            model->knots_ = cfg.num_list(section, "knots");
        }
        const auto c = cfg.num_list(section, "coefficients");
        model->coefs_ = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<long>(c.size()));
        model->trim_eps_ = trim;
        model->rank_deficient_ = cfg.flag_or(section, "rank_deficient", false);
        return model;
    }
    if (kind == "oracle") {
        return std::make_shared<OraclePropensity>(
            StructuralDgp::from_config(cfg, section + ".dgp"), trim);
    }
    throw ConfigError("unknown propensity kind '" + kind + "'");
}

}  // namespace ewmiv
