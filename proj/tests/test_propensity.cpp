#include <doctest.h>

#include <cmath>

#include "ewmiv/errors.hpp"
#include "ewmiv/propensity.hpp"
#include "helpers.hpp"

using namespace ewmiv;

namespace {

/// Scalar-regressor process with p(t) = 0.2 + 0.3 t + 0.2 t^2 on [-1, 1].
StructuralDgp quadratic_scalar_dgp() {
    StructuralDgp dgp;
    dgp.covariate_law = {MarginalDist::constant(1.0), MarginalDist::uniform(-1.0, 1.0)};
    dgp.instrument_law = {MarginalDist::constant(0.0)};
    dgp.selection.link = SelectionIndex::Link::LinearClamp;
    dgp.selection.features = FeatureMap::parse({"1", "x2", "x2*x2"});
    dgp.selection.gamma = Eigen::Vector3d(0.2, 0.3, 0.2);
    dgp.outcome.beta0 = Eigen::Vector2d(0.0, 0.0);
    dgp.outcome.beta1 = Eigen::Vector2d(0.0, 0.0);
    return dgp;
}

}  // namespace

TEST_SUITE_BEGIN("propensity");

TEST_CASE("logit recovers the generating coefficients") {
    const StructuralDgp dgp = testutil::logit_recovery_dgp();
    const Sample s = sample_dgp(dgp, 100000, 17);
    const FeatureMap features = FeatureMap::parse({"x1", "x2", "z1", "z2"});
    const LogitPropensity model = fit_logit(s, features);
    const Eigen::Vector4d truth(0.3, 0.4, -0.6, 0.5);
    CHECK((model.coefficients() - truth).lpNorm<Eigen::Infinity>() <= 0.05);
    CHECK_FALSE(model.separation_fallback());
}

TEST_CASE("constant labels trigger the separation fallback and clamp") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    Sample s = sample_dgp(dgp, 400, 3);
    s.d.setOnes();
    const LogitPropensity model =
        fit_logit(s, FeatureMap::parse({"1", "x2", "z1", "z2"}), 1e-3);
    CHECK(model.separation_fallback());
    CHECK(model.warnings().size() > 0);
    for (int i = 0; i < 20; ++i) {
        CHECK(model.predict(s.x.row(i), s.z.row(i)) == doctest::Approx(1.0 - 1e-3));
    }
}

TEST_CASE("intercept-only logit predicts the sample mean") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    const Sample s = sample_dgp(dgp, 5000, 5);
    const LogitPropensity model = fit_logit(s, FeatureMap::parse({"1"}));
    const double mean_d = s.d.cast<double>().mean();
    CHECK(model.predict(s.x.row(0), s.z.row(0)) == doctest::Approx(mean_d).epsilon(1e-6));
}

TEST_CASE("logit predictions are invariant to affine feature rescaling") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    const Sample s = sample_dgp(dgp, 4000, 7);
    Sample scaled = s;
    scaled.z.col(0) = 1000.0 * s.z.col(0).array() - 250.0;
    scaled.x.col(1) = 0.01 * s.x.col(1).array() + 3.0;

    const FeatureMap features = FeatureMap::parse({"1", "x2", "z1", "z2"});
    const LogitPropensity a = fit_logit(s, features);
    const LogitPropensity b = fit_logit(scaled, features);
    for (int i = 0; i < 50; ++i) {
        CHECK(a.predict(s.x.row(i), s.z.row(i)) ==
              doctest::Approx(b.predict(scaled.x.row(i), scaled.z.row(i))).epsilon(1e-6));
    }
}

TEST_CASE("logit needs more rows than features") {
    const Sample s = sample_dgp(testutil::canonical_dgp(), 4, 1);
    CHECK_THROWS_AS(fit_logit(s, FeatureMap::parse({"1", "x2", "z1", "z2", "z1*z2"})),
                    ConfigError);
}

TEST_CASE("degree-zero local fit is the kernel-weighted mean") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    const Sample s = sample_dgp(dgp, 300, 9);
    const double h = 0.8;
    const LocalPolyPropensity model = fit_local_poly(s, 0, h);

    const Eigen::VectorXd xq = s.x.row(7);
    const Eigen::VectorXd zq = s.z.row(7);
    // Hand-rolled Nadaraya-Watson over the same range-scaled columns.
    Eigen::MatrixXd cols(s.n(), 3);
    cols.col(0) = s.x.col(1);
    cols.col(1) = s.z.col(0);
    cols.col(2) = s.z.col(1);
    Eigen::RowVectorXd q(3);
    q << xq(1), zq(0), zq(1);
    Eigen::Vector3d scale;
    for (int j = 0; j < 3; ++j) {
        scale(j) = cols.col(j).maxCoeff() - cols.col(j).minCoeff();
    }
    double num = 0, den = 0;
    for (int i = 0; i < s.n(); ++i) {
        double w = 1.0;
        for (int j = 0; j < 3; ++j) {
            const double u = (cols(i, j) - q(j)) / (scale(j) * h);
            w *= std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI);
        }
        num += w * s.d(i);
        den += w;
    }
    CHECK(model.predict_untrimmed(xq, zq) == doctest::Approx(num / den).epsilon(1e-10));
}

TEST_CASE("constant take-up gives one after clamping") {
    Sample s = sample_dgp(testutil::canonical_dgp(), 500, 13);
    s.d.setOnes();
    const LocalPolyPropensity model = fit_local_poly(s, 1, 0.25);
    // Interior query so the eigenvalue trim passes.
    Eigen::Vector2d x(1.0, 0.5);
    Eigen::Vector2d z(2.0, 1.0);
    CHECK(model.predict(x, z) == doctest::Approx(1.0 - 1e-3));
}

TEST_CASE("eigenvalue trim zeroes isolated queries") {
    const Sample s = sample_dgp(testutil::canonical_dgp(), 200, 15);
    const LocalPolyPropensity model = fit_local_poly(s, 1, 0.05);
    Eigen::Vector2d far_x(1.0, 40.0);
    Eigen::Vector2d far_z(90.0, 70.0);
    // No mass near the query: the trim forces 0, clamped up to trim_eps.
    CHECK(model.predict(far_x, far_z) == doctest::Approx(1e-3));
}

TEST_CASE("huge bandwidth reproduces the global polynomial fit") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    const Sample s = sample_dgp(dgp, 400, 19);
    const LocalPolyPropensity model = fit_local_poly(s, 1, 1e5);

    // Global least squares of d on (1, x2, z1, z2).
    Eigen::MatrixXd design(s.n(), 4);
    design.col(0).setOnes();
    design.col(1) = s.x.col(1);
    design.col(2) = s.z.col(0);
    design.col(3) = s.z.col(1);
    const Eigen::VectorXd beta =
        (design.transpose() * design).ldlt().solve(design.transpose() * s.d.cast<double>());
    for (int i = 0; i < 10; ++i) {
        const double global = beta(0) + beta(1) * s.x(i, 1) + beta(2) * s.z(i, 0) +
                              beta(3) * s.z(i, 1);
        CHECK(model.predict_untrimmed(s.x.row(i), s.z.row(i)) ==
              doctest::Approx(global).epsilon(1e-5));
    }
}

TEST_CASE("local polynomial error shrinks with n under the rate bandwidth") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    // Smoothness 2 (locally linear fit), 3 continuous regressors.
    const auto sup_err_sq = [&](int n, std::uint64_t seed) {
        const Sample s = sample_dgp(dgp, n, seed);
        const double h = 0.7 * std::pow(n, -1.0 / 7.0);
        const LocalPolyPropensity model = fit_local_poly(s, 1, h);
        double worst = 0.0;
        Rng rng(seed ^ 0xFEED, 2);
        Eigen::Vector2d x(1.0, 0.0);
        Eigen::Vector2d z(0.0, 0.0);
        for (int g = 0; g < 20; ++g) {
            x(1) = rng.uniform(0.2, 0.8);
            z(0) = rng.uniform(0.8, 3.2);
            z(1) = rng.uniform(0.4, 1.6);
            worst = std::max(worst, std::abs(model.predict(x, z) - dgp.propensity(x, z)));
        }
        return worst * worst;
    };
    double small = 0, large = 0;
    for (int rep = 0; rep < 3; ++rep) {
        small += sup_err_sq(500, 100 + rep);
        large += sup_err_sq(4000, 200 + rep);
    }
    CHECK(large < small);
}

TEST_CASE("series constant basis predicts the sample mean") {
    const Sample s = sample_dgp(testutil::canonical_dgp(), 2000, 23);
    const SeriesPropensity model = fit_series(s, "polynomial", 1);
    CHECK(model.predict(s.x.row(0), s.z.row(0)) ==
          doctest::Approx(s.d.cast<double>().mean()).epsilon(1e-10));
}

TEST_CASE("series recovers a quadratic propensity in a scalar regressor") {
    const StructuralDgp dgp = quadratic_scalar_dgp();
    const Sample s = sample_dgp(dgp, 100000, 29);
    const SeriesPropensity model = fit_series(s, "polynomial", 3);

    // The fitted function is itself a quadratic in the regressor; recover
    // its raw-scale coefficients by interpolation at three points and
    // compare with the truth.
    Eigen::Matrix3d vand;
    Eigen::Vector3d values;
    const double pts[3] = {-0.7, 0.0, 0.7};
    for (int k = 0; k < 3; ++k) {
        Eigen::Vector2d x(1.0, pts[k]);
        Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
        vand(k, 0) = 1.0;
        vand(k, 1) = pts[k];
        vand(k, 2) = pts[k] * pts[k];
        values(k) = model.predict(x, z);
    }
    const Eigen::Vector3d coefs = vand.colPivHouseholderQr().solve(values);
    CHECK(std::abs(coefs(0) - 0.2) <= 0.05);
    CHECK(std::abs(coefs(1) - 0.3) <= 0.05);
    CHECK(std::abs(coefs(2) - 0.2) <= 0.05);
}

TEST_CASE("duplicated regressor column leaves series predictions unchanged") {
    const StructuralDgp dgp = quadratic_scalar_dgp();
    const Sample s = sample_dgp(dgp, 3000, 31);
    Sample dup = s;
    dup.x.conservativeResize(s.n(), 3);
    dup.x.col(2) = s.x.col(1);  // exact copy makes the Gram matrix singular

    const SeriesPropensity base = fit_series(s, "polynomial", 3);
    const SeriesPropensity with_dup = fit_series(dup, "polynomial", 5);
    CHECK(with_dup.rank_deficient());
    for (int i = 0; i < 30; ++i) {
        CHECK(base.predict(s.x.row(i), s.z.row(i)) ==
              doctest::Approx(with_dup.predict(dup.x.row(i), dup.z.row(i))).epsilon(1e-6));
    }
}

TEST_CASE("series rejects k larger than n") {
    const Sample s = sample_dgp(testutil::canonical_dgp(), 20, 2);
    CHECK_THROWS_AS(fit_series(s, "polynomial", 21), ConfigError);
}

TEST_CASE("spline series basis") {
    const StructuralDgp dgp = quadratic_scalar_dgp();
    const Sample s = sample_dgp(dgp, 20000, 37);
    const SeriesPropensity model = fit_series(s, "spline", 8);
    Eigen::Vector2d x(1.0, 0.3);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
    CHECK(std::abs(model.predict(x, z) - dgp.propensity(x, z)) < 0.05);
    CHECK_THROWS_AS(fit_series(s, "spline", 3), ConfigError);
    CHECK_THROWS_AS(fit_series(sample_dgp(testutil::canonical_dgp(), 500, 1), "spline", 8),
                    ConfigError);
}

TEST_CASE("predictions always honor the trim bounds") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    const Sample s = sample_dgp(dgp, 800, 41);
    const std::vector<PropensityPtr> models = {
        std::make_shared<LogitPropensity>(fit_logit(s, FeatureMap::parse({"1", "z1"}))),
        std::make_shared<LocalPolyPropensity>(fit_local_poly(s, 1, 0.3)),
        std::make_shared<SeriesPropensity>(fit_series(s, "polynomial", 6)),
        std::make_shared<OraclePropensity>(dgp)};
    Rng rng(5, 1);
    for (const auto& model : models) {
        for (int t = 0; t < 200; ++t) {
            Eigen::Vector2d x(1.0, rng.uniform(-5.0, 5.0));
            Eigen::Vector2d z(rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0));
            const double p = model->predict(x, z);
            REQUIRE(p >= 1e-3);
            REQUIRE(p <= 1.0 - 1e-3);
        }
    }
}

TEST_CASE("cross-validated bandwidth") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    const Sample s = sample_dgp(dgp, 250, 43);

    SUBCASE("single-point grids are returned as-is") {
        CHECK(cv_bandwidth(s, {0.42}) == 0.42);
        CHECK(cv_bandwidth(s, {0.06}) == 0.06);
    }
    SUBCASE("validation rejects bad grids") {
        CHECK_THROWS_AS(cv_bandwidth(s, {}), ConfigError);
        CHECK_THROWS_AS(cv_bandwidth(s, {0.5, -0.1}), ConfigError);
    }
    SUBCASE("choice is near the brute-force leave-one-out minimum") {
        const std::vector<double> grid = {0.1, 0.2, 0.4, 0.8, 1.6};
        const double chosen = cv_bandwidth(s, grid);

        // Independent leave-one-out evaluation via direct weighted least
        // squares on the range-scaled columns.
        Eigen::MatrixXd cols(s.n(), 3);
        cols.col(0) = s.x.col(1);
        cols.col(1) = s.z.col(0);
        cols.col(2) = s.z.col(1);
        for (int j = 0; j < 3; ++j) {
            const double range = cols.col(j).maxCoeff() - cols.col(j).minCoeff();
            cols.col(j) /= range;
        }
        auto loo_error = [&](double h) {
            double err = 0;
            for (int i = 0; i < s.n(); ++i) {
                Eigen::Matrix4d mom = Eigen::Matrix4d::Zero();
                Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
                for (int j = 0; j < s.n(); ++j) {
                    if (j == i) continue;
                    double w = 1.0;
                    Eigen::Vector4d b;
                    b(0) = 1.0;
                    for (int k = 0; k < 3; ++k) {
                        const double u = (cols(j, k) - cols(i, k)) / h;
                        w *= std::exp(-0.5 * u * u);
                        b(k + 1) = u;
                    }
                    mom += w * b * b.transpose();
                    rhs += w * b * s.d(j);
                }
                const double pred = std::clamp(mom.ldlt().solve(rhs)(0), 0.0, 1.0);
                err += (s.d(i) - pred) * (s.d(i) - pred);
            }
            return err;
        };
        double best = std::numeric_limits<double>::infinity();
        for (double h : grid) best = std::min(best, loo_error(h));
        CHECK(loo_error(chosen) <= 1.05 * best);
    }
}

TEST_CASE("data-bound local polynomial models reload against the sample") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    const Sample s = sample_dgp(dgp, 600, 49);
    const LocalPolyPropensity model = fit_local_poly(s, 1, 0.25);
    TextConfig cfg;
    model.save(cfg, "model.propensity");
    CHECK_THROWS_AS(load_propensity(cfg, "model.propensity"), ConfigError);  // needs data
    const PropensityPtr back = load_propensity(cfg, "model.propensity", &s);
    Eigen::Vector2d x(1.0, 0.5);
    Eigen::Vector2d z(2.0, 1.0);
    CHECK(back->predict(x, z) == doctest::Approx(model.predict(x, z)).epsilon(1e-12));
}

TEST_CASE("logit and series models survive a save/load round trip") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    const Sample s = sample_dgp(dgp, 2000, 47);

    TextConfig cfg;
    const LogitPropensity logit = fit_logit(s, FeatureMap::parse({"1", "x2", "z1", "z2"}));
    logit.save(cfg, "model.propensity");
    const PropensityPtr logit2 = load_propensity(cfg, "model.propensity");

    TextConfig cfg2;
    const SeriesPropensity series = fit_series(s, "polynomial", 5);
    series.save(cfg2, "model.propensity");
    const PropensityPtr series2 = load_propensity(cfg2, "model.propensity");

    for (int i = 0; i < 25; ++i) {
        CHECK(logit.predict(s.x.row(i), s.z.row(i)) ==
              doctest::Approx(logit2->predict(s.x.row(i), s.z.row(i))).epsilon(1e-9));
        CHECK(series.predict(s.x.row(i), s.z.row(i)) ==
              doctest::Approx(series2->predict(s.x.row(i), s.z.row(i))).epsilon(1e-9));
    }
}

TEST_SUITE_END();
