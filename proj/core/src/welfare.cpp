#include "ewmiv/welfare.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "ewmiv/errors.hpp"
#include "ewmiv/random.hpp"
#include "ewmiv/smoothing.hpp"

namespace ewmiv {

double CostSpec::arm_cost(const Eigen::VectorXd& z, double z1_new, int row) const {
    switch (kind) {
        case Kind::ManipulationGap: return std::abs(z1_new - z(0));
        case Kind::Table: return table(row);
    }
    return 0.0;
}

ArmCostFn CostSpec::arm_cost_fn() const {
    if (kind == Kind::Table) {
        throw ConfigError("table costs are data-bound and have no population form");
    }
    return [](const Eigen::VectorXd&, const Eigen::VectorXd& z, double z1_new) {
        return std::abs(z1_new - z(0));
    };
}

void CostSpec::validate(int n) const {
    if (kappa < 0) throw ConfigError("budget cap kappa must be nonnegative");
    if (kind == Kind::Table) {
        if (table.size() != n) {
            throw ConfigError("cost table length " + std::to_string(table.size()) +
                              " != sample size " + std::to_string(n));
        }
        if (table.size() > 0 && table.minCoeff() < 0) {
            throw ConfigError("cost table has negative entries");
        }
    }
}

GainVector build_gains(const Sample& sample, const PropensityModel& p_model,
                       const MteModel& mte_model, const ManipulationPair& pair,
                       const CostSpec& cost, const ColumnSelector& features) {
    sample.validate();
    cost.validate(sample.n());

    const int n = sample.n();
    GainVector gains;
    gains.pair = pair;
    gains.g.resize(n);
    gains.c1.resize(n);
    gains.c0.resize(n);
    gains.p1.resize(n);
    gains.p0.resize(n);
    gains.v = features.matrix(sample.x, sample.z);
    gains.v_names = features.names();

    std::vector<int> bad_rows;
    std::string first_message;
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd x = sample.x.row(i);
        const Eigen::VectorXd z = sample.z.row(i);
        const Eigen::VectorXd z0 = pair.manipulate(0, z);
        const Eigen::VectorXd z1 = pair.manipulate(1, z);
        gains.p0(i) = p_model.predict(x, z0);
        gains.p1(i) = p_model.predict(x, z1);
        gains.c0(i) = cost.arm_cost(z, z0(0), i) * gains.p0(i);
        gains.c1(i) = cost.arm_cost(z, z1(0), i) * gains.p1(i);
        try {
            gains.g(i) = mte_model.integrate(x, z, gains.p0(i), gains.p1(i));
        } catch (const ExtrapolationError& e) {
            if (bad_rows.empty()) first_message = e.what();
            bad_rows.push_back(i);
            gains.g(i) = std::numeric_limits<double>::quiet_NaN();
        }
    }
    if (!bad_rows.empty()) {
        std::string rows;
        const std::size_t shown = std::min<std::size_t>(bad_rows.size(), 20);
        for (std::size_t k = 0; k < shown; ++k) {
            if (k) rows += ", ";
            rows += std::to_string(bad_rows[k]);
        }
        if (bad_rows.size() > shown) {
            rows += ", … (" + std::to_string(bad_rows.size() - shown) + " more)";
        }
        throw ExtrapolationError("gain construction needs the MTE outside its identified "
                                 "range at rows [" + rows + "]; first failure: " + first_message,
                                 bad_rows);
    }
    return gains;
}

WelfareReport make_report(const GainVector& gains, const Eigen::VectorXi& assignments) {
    return make_report(gains, assignments, gains.p0);
}

WelfareReport make_report(const GainVector& gains, const Eigen::VectorXi& assignments,
                          const Eigen::VectorXd& baseline_takeup) {
    const int n = gains.n();
    if (assignments.size() != n || baseline_takeup.size() != n) {
        throw ConfigError("report inputs are not conformable with the gain vector");
    }
    WelfareReport rep;
    for (int i = 0; i < n; ++i) {
        const double pi = assignments(i) ? 1.0 : 0.0;
        rep.share_eligible += pi;
        rep.welfare_gain += pi * gains.g(i);
        rep.avg_takeup_change += pi * (gains.p1(i) - baseline_takeup(i));
    }
    rep.share_eligible /= n;
    rep.welfare_gain /= n;
    rep.avg_takeup_change /= n;
    if (rep.avg_takeup_change != 0.0) {
        rep.prte = rep.welfare_gain / rep.avg_takeup_change;
        rep.prte_defined = true;
    } else {
        rep.prte = std::numeric_limits<double>::quiet_NaN();
        rep.prte_defined = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Doubly robust scores

namespace {

/// Product-Gaussian KDE over the non-constant columns of a point set.
/// Kernel centers are capped at `max_centers` via a seeded subsample so
/// density-ratio fitting stays tractable inside the cross-fitting loop.
class ProductKde {
public:
    ProductKde(Eigen::MatrixXd pts, double bandwidth_mult, int max_centers,
               std::uint64_t seed)
        : pts_(std::move(pts)) {
        if (max_centers > 0 && pts_.rows() > max_centers) {
            Rng rng(seed, 881);
            Eigen::MatrixXd kept(max_centers, pts_.cols());
            for (int i = 0; i < max_centers; ++i) {
                const int pick = static_cast<int>(rng.uniform01() * pts_.rows());
                kept.row(i) = pts_.row(std::min<int>(pick, static_cast<int>(pts_.rows()) - 1));
            }
            pts_ = std::move(kept);
        }
        const int d = static_cast<int>(pts_.cols());
        const int n = static_cast<int>(pts_.rows());
        scale_.resize(d);
        for (int j = 0; j < d; ++j) {
            const double mean = pts_.col(j).mean();
            const double sd =
                std::sqrt((pts_.col(j).array() - mean).square().sum() / std::max(1, n - 1));
            // Silverman-style per-dimension bandwidth.
            const double h = (sd > 0 ? sd : 1.0) * bandwidth_mult *
                             std::pow(static_cast<double>(n), -1.0 / (4.0 + d));
            scale_(j) = h;
        }
    }

    double density(const Eigen::RowVectorXd& q) const {
        const int n = static_cast<int>(pts_.rows());
        const int d = static_cast<int>(pts_.cols());
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double w = 1.0;
            for (int j = 0; j < d; ++j) {
                const double u = (pts_(i, j) - q(j)) / scale_(j);
                w *= std::exp(-0.5 * u * u) / (scale_(j) * std::sqrt(2.0 * M_PI));
            }
            total += w;
        }
        return total / n;
    }

private:
    Eigen::MatrixXd pts_;
    Eigen::VectorXd scale_;
};

std::vector<int> complement(const std::vector<std::vector<int>>& folds, int skip) {
    std::vector<int> out;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        if (static_cast<int>(k) == skip) continue;
        out.insert(out.end(), folds[k].begin(), folds[k].end());
    }
    return out;
}

Eigen::MatrixXd nonconstant_xz(const Sample& s, std::vector<int>* kept_x,
                               std::vector<int>* kept_z) {
    std::vector<Eigen::VectorXd> cols;
    for (int j = 0; j < s.d_x(); ++j) {
        if ((s.x.col(j).array() - s.x(0, j)).abs().maxCoeff() > 0) {
            cols.push_back(s.x.col(j));
            if (kept_x) kept_x->push_back(j);
        }
    }
    for (int j = 0; j < s.d_z(); ++j) {
        if ((s.z.col(j).array() - s.z(0, j)).abs().maxCoeff() > 0) {
            cols.push_back(s.z.col(j));
            if (kept_z) kept_z->push_back(j);
        }
    }
    Eigen::MatrixXd out(s.n(), static_cast<long>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<long>(j)) = cols[j];
    return out;
}

}  // namespace

DrScoreSet dr_scores(const Sample& sample, int folds, const ManipulationPair& pair,
                     const DrNuisanceConfig& config, DrGSource g_source) {
    sample.validate();
    const int n = sample.n();
    if (folds < 2) throw ConfigError("cross-fitting needs at least 2 folds");
    if (folds > n / 10) {
        throw ConfigError("fold count " + std::to_string(folds) + " too large for n=" +
                          std::to_string(n) + " (need folds <= n/10)");
    }
    if (g_source == DrGSource::Oracle && config.oracle_dgp == nullptr) {
        throw ConfigError("oracle density ratio requested without a generating process");
    }
    if (config.oracle_nuisances && config.oracle_dgp == nullptr) {
        throw ConfigError("oracle nuisances requested without a generating process");
    }

    // Seeded permutation, then round-robin: fold sizes even to within one.
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(config.fold_seed, 777);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform01() * (i + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    std::vector<std::vector<int>> fold_rows(static_cast<std::size_t>(folds));
    Eigen::VectorXi fold_id(n);
    for (int i = 0; i < n; ++i) {
        const int k = i % folds;
        fold_rows[static_cast<std::size_t>(k)].push_back(perm[static_cast<std::size_t>(i)]);
        fold_id(perm[static_cast<std::size_t>(i)]) = k;
    }

    const bool oracle_nuisances = config.oracle_nuisances;
    Eigen::VectorXd gamma(n);

    for (int k = 0; k < folds; ++k) {
        const std::vector<int> train_idx = complement(fold_rows, k);
        const Sample train = sample.rows(train_idx);

        PropensityPtr p_model;
        MtePtr phi_model;
        std::unique_ptr<ProductKde> kde_base, kde_arm1, kde_arm0;

        if (oracle_nuisances) {
            p_model = std::make_shared<OraclePropensity>(*config.oracle_dgp);
            phi_model = std::make_shared<OracleMte>(*config.oracle_dgp);
        } else {
            FeatureMap fm = config.propensity_features.empty()
                                ? FeatureMap::default_linear(sample.d_x(), sample.d_z())
                                : FeatureMap::parse(config.propensity_features);
            p_model = std::make_shared<LogitPropensity>(fit_logit(train, fm));
            if (config.phi_kind == "polynomial") {
                phi_model = std::make_shared<PolynomialMte>(
                    fit_polynomial_mte(train, *p_model, config.phi_degree));
            } else if (config.phi_kind == "partially_linear") {
                phi_model = std::make_shared<PartiallyLinearMte>(
                    fit_partially_linear_mte(train, *p_model, config.phi_bandwidth));
            } else {
                throw ConfigError("unknown conditional-mean estimator '" + config.phi_kind +
                                  "'");
            }
        }

        if (g_source == DrGSource::KernelRatio) {
            // Shared bandwidth and one common column set across the three
            // density estimates (a manipulation may collapse z1 to a
            // constant; the column layout must not change with it).
            const double mult = (config.g_bandwidth > 0) ? config.g_bandwidth : 1.0;
            std::vector<int> kept_x, kept_z;
            Eigen::MatrixXd base = nonconstant_xz(train, &kept_x, &kept_z);
            Eigen::MatrixXd arm1 = base, arm0 = base;
            for (std::size_t j = 0; j < kept_z.size(); ++j) {
                if (kept_z[j] != 0) continue;
                const long col = static_cast<long>(kept_x.size() + j);
                for (int i = 0; i < train.n(); ++i) {
                    arm1(i, col) = pair.apply(1, train.z(i, 0));
                    arm0(i, col) = pair.apply(0, train.z(i, 0));
                }
            }
            const int centers = config.g_kde_centers;
            kde_base = std::make_unique<ProductKde>(base, mult, centers, config.fold_seed);
            kde_arm1 = std::make_unique<ProductKde>(arm1, mult, centers, config.fold_seed);
            kde_arm0 = std::make_unique<ProductKde>(arm0, mult, centers, config.fold_seed);
        }

        std::vector<int> kept_x, kept_z;
        const Eigen::MatrixXd eval_pts = nonconstant_xz(sample, &kept_x, &kept_z);

        for (int i : fold_rows[static_cast<std::size_t>(k)]) {
            const Eigen::VectorXd x = sample.x.row(i);
            const Eigen::VectorXd z = sample.z.row(i);
            const double p_base = p_model->predict(x, z);
            const double p1 = p_model->predict(x, pair.manipulate(1, z));
            const double p0 = p_model->predict(x, pair.manipulate(0, z));

            const double phi1 = config.phi_scale * phi_model->conditional_mean(p1, x, z);
            const double phi0 = config.phi_scale * phi_model->conditional_mean(p0, x, z);
            const double phi_base = config.phi_scale * phi_model->conditional_mean(p_base, x, z);

            double g_hat = 0.0;
            if (pair.alpha1 == pair.alpha0) {
                g_hat = 0.0;  // identical pushforwards
            } else if (g_source == DrGSource::Oracle) {
                g_hat = oracle_density_ratio(*config.oracle_dgp, pair, x, z);
            } else {
                const Eigen::RowVectorXd q = eval_pts.row(i);
                const double f_base = kde_base->density(q);
                if (f_base > 1e-300) {
                    g_hat = (kde_arm1->density(q) - kde_arm0->density(q)) / f_base;
                }
            }
            g_hat *= config.g_scale;
            g_hat = std::clamp(g_hat, -config.g_max, config.g_max);

            gamma(i) = phi1 - phi0 + g_hat * (sample.y(i) - phi_base);
        }
    }

    DrScoreSet out;
    out.gamma = gamma;
    out.fold_id = fold_id;
    out.folds = folds;
    out.g_source = (g_source == DrGSource::Oracle) ? "oracle" : "kernel_ratio";
    return out;
}

void write_dr_scores_csv(const DrScoreSet& scores, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write score file: " + path);
    out << "gamma,fold\n";
    for (Eigen::Index i = 0; i < scores.gamma.size(); ++i) {
        out << format_num(scores.gamma(i)) << "," << scores.fold_id(i) << "\n";
    }
}

std::string dr_scores_to_json(const DrScoreSet& scores) {
    nlohmann::ordered_json j;
    j["folds"] = scores.folds;
    j["g_source"] = scores.g_source;
    j["gamma"] = std::vector<double>(scores.gamma.data(),
                                     scores.gamma.data() + scores.gamma.size());
    j["fold_id"] = std::vector<int>(scores.fold_id.data(),
                                    scores.fold_id.data() + scores.fold_id.size());
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Binary-instrument variants

namespace {

struct ArmMeans {
    // Per-row conditional means of a response under z=0 and z=1.
    Eigen::VectorXd m0, m1;
};

bool all_discrete(const Eigen::MatrixXd& x) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        std::vector<double> vals(x.col(j).data(), x.col(j).data() + x.rows());
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        if (vals.size() > 25) return false;
    }
    return true;
}

/// E[resp | X, Z=arm] by covariate-cell means (all-discrete X) or locally
/// linear smoothing within each arm.
ArmMeans conditional_arm_means(const Sample& sample, const Eigen::VectorXd& resp) {
    const int n = sample.n();
    ArmMeans out;
    out.m0.resize(n);
    out.m1.resize(n);

    if (all_discrete(sample.x)) {
        auto row_key = [&](int i) {
            std::vector<double> key(static_cast<std::size_t>(sample.d_x()));
            for (int j = 0; j < sample.d_x(); ++j) key[static_cast<std::size_t>(j)] = sample.x(i, j);
            return key;
        };
        std::map<std::vector<double>, std::array<std::pair<double, int>, 2>> cells;
        for (int i = 0; i < n; ++i) {
            auto& cell = cells[row_key(i)];
            const int arm = static_cast<int>(sample.z(i, 0));
            cell[static_cast<std::size_t>(arm)].first += resp(i);
            cell[static_cast<std::size_t>(arm)].second += 1;
        }
        std::vector<std::string> missing;
        for (const auto& [key, cell] : cells) {
            if (cell[0].second == 0 || cell[1].second == 0) {
                std::string desc = "(";
                for (std::size_t j = 0; j < key.size(); ++j) {
                    if (j) desc += ", ";
                    desc += format_num(key[j]);
                }
                desc += ")";
                missing.push_back(desc);
            }
        }
        if (!missing.empty()) {
            std::string list;
            for (std::size_t j = 0; j < std::min<std::size_t>(missing.size(), 10); ++j) {
                if (j) list += "; ";
                list += missing[j];
            }
            throw EstimationError("covariate cells observed under a single instrument arm: " +
                                  list);
        }
        for (int i = 0; i < n; ++i) {
            const auto& cell = cells[row_key(i)];
            out.m0(i) = cell[0].first / cell[0].second;
            out.m1(i) = cell[1].first / cell[1].second;
        }
        return out;
    }

    // Continuous covariates: locally linear fit within each arm over the
    // scaled non-constant columns.
    std::vector<int> arm_rows[2];
    for (int i = 0; i < n; ++i) {
        arm_rows[sample.z(i, 0) > 0.5 ? 1 : 0].push_back(i);
    }
    if (arm_rows[0].empty() || arm_rows[1].empty()) {
        throw EstimationError("one instrument arm is empty");
    }

    std::vector<int> kept;
    for (int j = 0; j < sample.d_x(); ++j) {
        if ((sample.x.col(j).array() - sample.x(0, j)).abs().maxCoeff() > 0) kept.push_back(j);
    }
    const int d = static_cast<int>(kept.size());
    Eigen::MatrixXd pts(n, d);
    for (int j = 0; j < d; ++j) {
        const Eigen::VectorXd col = sample.x.col(kept[static_cast<std::size_t>(j)]);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / std::max(1, n - 1));
        pts.col(j) = col / (sd > 0 ? sd : 1.0);
    }
    const double h = std::pow(static_cast<double>(n), -1.0 / (4.0 + d));

    for (int arm = 0; arm < 2; ++arm) {
        const auto& rows = arm_rows[static_cast<std::size_t>(arm)];
        Eigen::MatrixXd arm_pts(static_cast<long>(rows.size()), d);
        Eigen::VectorXd arm_resp(static_cast<long>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            arm_pts.row(static_cast<long>(r)) = pts.row(rows[r]);
            arm_resp(static_cast<long>(r)) = resp(rows[r]);
        }
        Eigen::VectorXd& target = arm ? out.m1 : out.m0;
        for (int i = 0; i < n; ++i) {
            const auto fit = local_poly_at(arm_pts, arm_resp, pts.row(i), 1, h, Kernel{});
            target(i) = (fit.lambda_min > 1e-12) ? fit.value : arm_resp.mean();
        }
    }
    return out;
}

void require_binary_instrument(const Sample& sample) {
    if (sample.d_z() != 1) {
        throw ConfigError("binary-instrument welfare needs a single instrument column");
    }
    for (int i = 0; i < sample.n(); ++i) {
        if (sample.z(i, 0) != 0.0 && sample.z(i, 0) != 1.0) {
            throw ConfigError("instrument must be binary 0/1; row " + std::to_string(i) +
                              " has z = " + format_num(sample.z(i, 0)));
        }
    }
}

}  // namespace

double binary_iv_welfare(const Sample& sample, const Eigen::VectorXi& assignments) {
    sample.validate();
    require_binary_instrument(sample);
    if (assignments.size() != sample.n()) {
        throw ConfigError("assignment vector length mismatch");
    }
    const ArmMeans means = conditional_arm_means(sample, sample.y);
    double total = 0.0;
    for (int i = 0; i < sample.n(); ++i) {
        total += assignments(i) ? means.m1(i) : means.m0(i);
    }
    return total / sample.n();
}

double rationed_welfare(const Sample& sample, const Eigen::VectorXi& assignments, double kappa) {
    sample.validate();
    require_binary_instrument(sample);
    if (assignments.size() != sample.n()) {
        throw ConfigError("assignment vector length mismatch");
    }
    const ArmMeans y_means = conditional_arm_means(sample, sample.y);
    const ArmMeans d_means = conditional_arm_means(sample, sample.d.cast<double>());

    const int n = sample.n();
    double ey0 = 0.0, contrast = 0.0, ed0 = 0.0, ed_pi = 0.0;
    for (int i = 0; i < n; ++i) {
        const double pi = assignments(i) ? 1.0 : 0.0;
        ey0 += y_means.m0(i);
        contrast += pi * (y_means.m1(i) - y_means.m0(i));
        ed0 += d_means.m0(i);
        ed_pi += pi * d_means.m1(i) + (1.0 - pi) * d_means.m0(i);
    }
    ey0 /= n;
    contrast /= n;
    ed0 /= n;
    ed_pi /= n;

    if (ed0 > kappa) {
        throw InfeasibleError("estimated baseline take-up " + format_num(ed0) +
                              " already exceeds the cap " + format_num(kappa));
    }
    double factor = 1.0;
    if (ed_pi - ed0 > 0.0) {
        factor = std::min(1.0, (kappa - ed0) / (ed_pi - ed0));
    }
    return ey0 + contrast * factor;
}

}  // namespace ewmiv
