#include <doctest.h>

#include <cmath>

#include "ewmiv/errors.hpp"
#include "ewmiv/policy.hpp"
#include "ewmiv/random.hpp"
#include "helpers.hpp"
#include "policy_oracle.hpp"

using namespace ewmiv;

namespace {

GainVector synthetic_gains(int n, int d_v, std::uint64_t seed, bool with_costs = true) {
    Rng rng(seed, 500);
    GainVector gains;
    gains.g.resize(n);
    gains.c1.resize(n);
    gains.c0.resize(n);
    gains.p1.resize(n);
    gains.p0.resize(n);
    gains.v.resize(n, d_v);
    for (int j = 0; j < d_v; ++j) {
        gains.v_names.push_back("z" + std::to_string(j + 1));
    }
    for (int i = 0; i < n; ++i) {
        gains.g(i) = rng.uniform(-1.0, 1.0);
        gains.c1(i) = with_costs ? rng.uniform(0.0, 1.0) : 0.0;
        gains.c0(i) = with_costs ? rng.uniform(0.0, 0.3) : 0.0;
        gains.p0(i) = rng.uniform(0.1, 0.5);
        gains.p1(i) = gains.p0(i) + rng.uniform(0.0, 0.4);
        for (int j = 0; j < d_v; ++j) gains.v(i, j) = rng.normal(0.0, 1.0);
    }
    return gains;
}

Eigen::VectorXi labels_of(const PolicySpec& spec, const Eigen::MatrixXd& v) {
    Eigen::VectorXi out(v.rows());
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        out(i) = spec.is_empty() ? 0 : spec.assign_features(v.row(i));
    }
    return out;
}

double welfare_of_labels(const Eigen::VectorXi& labels, const Eigen::VectorXd& g) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels(i)) total += g(i);
    }
    return total / static_cast<double>(labels.size());
}

}  // namespace

TEST_SUITE_BEGIN("policy");

TEST_CASE("all-negative gains select nobody, all-positive everybody") {
    GainVector gains = synthetic_gains(30, 2, 1);
    gains.g = -gains.g.cwiseAbs();
    PolicySpec none = solve_fewm(gains, PolicyClass::Les, Backend::Enumerate);
    CHECK(none.attained_welfare == 0.0);
    CHECK(labels_of(none, gains.v).sum() == 0);

    gains.g = gains.g.cwiseAbs();
    PolicySpec all = solve_fewm(gains, PolicyClass::Les, Backend::Enumerate);
    CHECK(labels_of(all, gains.v).sum() == 30);
    CHECK(all.attained_welfare == doctest::Approx(gains.g.mean()).epsilon(1e-12));
}

TEST_CASE("enumerate backend attains the exhaustive labeling optimum") {
    for (int instance = 0; instance < 25; ++instance) {
        const GainVector gains = synthetic_gains(40, 2, 100 + instance);
        const PolicySpec spec = solve_fewm(gains, PolicyClass::Les, Backend::Enumerate);
        const auto oracle = testutil::best_halfplane_welfare(gains.g, gains.v);
        REQUIRE(spec.attained_welfare == doctest::Approx(oracle.welfare).epsilon(1e-12));
        // The reported welfare is reproducible from the returned rule.
        REQUIRE(welfare_of_labels(labels_of(spec, gains.v), gains.g) ==
                doctest::Approx(spec.attained_welfare).epsilon(1e-12));
    }
}

TEST_CASE("enumerate backend beats a large random-coefficient search") {
    for (int instance = 0; instance < 3; ++instance) {
        const GainVector gains = synthetic_gains(40, 2, 300 + instance);
        const PolicySpec spec = solve_fewm(gains, PolicyClass::Les, Backend::Enumerate);
        Rng rng(17 + instance, 9);
        double best_random = -1e300;
        for (int t = 0; t < 1000000; ++t) {
            const double l0 = rng.uniform(-1.0, 1.0);
            const double l1 = rng.uniform(-1.0, 1.0);
            const double l2 = rng.uniform(-1.0, 1.0);
            double welfare = 0.0;
            for (int i = 0; i < gains.n(); ++i) {
                if (l0 + l1 * gains.v(i, 0) + l2 * gains.v(i, 1) >= 0.0) {
                    welfare += gains.g(i);
                }
            }
            best_random = std::max(best_random, welfare / gains.n());
        }
        CHECK(spec.attained_welfare >= best_random - 1e-12);
    }
}

TEST_CASE("budget-constrained search matches the constrained labeling oracle") {
    for (int instance = 0; instance < 25; ++instance) {
        const GainVector gains = synthetic_gains(40, 2, 700 + instance);
        const double kappa = 0.25;
        const PolicySpec spec =
            solve_bewm(gains, PolicyClass::Les, kappa, Backend::Enumerate);
        const auto oracle =
            testutil::best_halfplane_welfare(gains.g, gains.v, &gains.c1, &gains.c0, kappa);
        REQUIRE(oracle.feasible_exists);
        REQUIRE_FALSE(spec.is_empty());
        REQUIRE(spec.attained_welfare == doctest::Approx(oracle.welfare).epsilon(1e-12));
        REQUIRE(spec.attained_budget <= kappa + 1e-12);
    }
}

TEST_CASE("slack and impossible budgets") {
    const GainVector gains = synthetic_gains(35, 2, 41);
    const PolicySpec unconstrained = solve_fewm(gains, PolicyClass::Les, Backend::Enumerate);
    const PolicySpec slack = solve_bewm(gains, PolicyClass::Les, 1e9, Backend::Enumerate);
    CHECK(slack.attained_welfare ==
          doctest::Approx(unconstrained.attained_welfare).epsilon(1e-12));
    // Labeling-equivalent, not just value-equivalent.
    CHECK((labels_of(slack, gains.v) - labels_of(unconstrained, gains.v)).cwiseAbs().sum() ==
          0);

    // Positive costs on both arms make every rule, constants included,
    // infeasible under a tiny cap.
    GainVector expensive = gains;
    expensive.c0.array() += 0.5;
    const PolicySpec empty = solve_bewm(expensive, PolicyClass::Les, 1e-6, Backend::Enumerate);
    CHECK(empty.is_empty());
    CHECK_THROWS_AS(empty.assign_features(Eigen::Vector2d(0, 0)), std::logic_error);
}

TEST_CASE("branch-and-bound backend agrees with enumeration") {
    for (int instance = 0; instance < 8; ++instance) {
        const GainVector gains = synthetic_gains(22, 2, 900 + instance);
        const PolicySpec enumerated =
            solve_fewm(gains, PolicyClass::Les, Backend::Enumerate);
        const PolicySpec milp = solve_fewm(gains, PolicyClass::Les, Backend::Milp);
        REQUIRE(milp.attained_welfare ==
                doctest::Approx(enumerated.attained_welfare).epsilon(1e-9));
        REQUIRE(welfare_of_labels(labels_of(milp, gains.v), gains.g) ==
                doctest::Approx(milp.attained_welfare).epsilon(1e-12));

        const double kappa = 0.2;
        const PolicySpec enum_b =
            solve_bewm(gains, PolicyClass::Les, kappa, Backend::Enumerate);
        const PolicySpec milp_b = solve_bewm(gains, PolicyClass::Les, kappa, Backend::Milp);
        if (enum_b.is_empty()) {
            REQUIRE(milp_b.is_empty());
        } else {
            REQUIRE(milp_b.attained_welfare ==
                    doctest::Approx(enum_b.attained_welfare).epsilon(1e-9));
            REQUIRE(milp_b.attained_budget <= kappa + 1e-9);
        }
    }
}

TEST_CASE("milp handles one and three features") {
    const GainVector g1 = synthetic_gains(30, 1, 1000);
    CHECK(solve_fewm(g1, PolicyClass::Les, Backend::Milp).attained_welfare ==
          doctest::Approx(solve_fewm(g1, PolicyClass::Les, Backend::Enumerate)
                              .attained_welfare)
              .epsilon(1e-9));
    const GainVector g3 = synthetic_gains(16, 3, 1001);
    CHECK(solve_fewm(g3, PolicyClass::Les, Backend::Milp).attained_welfare ==
          doctest::Approx(solve_fewm(g3, PolicyClass::Les, Backend::Enumerate)
                              .attained_welfare)
              .epsilon(1e-9));
}

TEST_CASE("threshold allocation search") {
    SUBCASE("single feature splits at the profitable half") {
        const int n = 21;
        GainVector gains = synthetic_gains(n, 1, 51, false);
        Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(n, -1.0, 1.0);
        gains.v.col(0) = v;
        const double median = v(n / 2);
        for (int i = 0; i < n; ++i) gains.g(i) = v(i) <= median ? 0.5 : -0.5;
        const PolicySpec spec = solve_ta(gains);
        REQUIRE(spec.kind == PolicySpec::Kind::Ta);
        CHECK(spec.signs(0) == 1);
        CHECK(spec.thresholds(0) == doctest::Approx(median));
    }
    SUBCASE("all-negative gains empty the box") {
        GainVector gains = synthetic_gains(25, 2, 53);
        gains.g = -gains.g.cwiseAbs() - Eigen::VectorXd::Constant(25, 0.01);
        const PolicySpec spec = solve_ta(gains);
        CHECK(spec.attained_welfare == 0.0);
        CHECK(labels_of(spec, gains.v).sum() == 0);
    }
    SUBCASE("matches brute force over all boxes") {
        for (int instance = 0; instance < 20; ++instance) {
            const GainVector gains = synthetic_gains(30, 2, 1100 + instance);
            const PolicySpec spec = solve_ta(gains);
            const auto oracle = testutil::best_box_welfare(gains.g, gains.v);
            REQUIRE(spec.attained_welfare ==
                    doctest::Approx(oracle.welfare).epsilon(1e-12));
        }
    }
    SUBCASE("budget-constrained boxes match the constrained brute force") {
        for (int instance = 0; instance < 10; ++instance) {
            const GainVector gains = synthetic_gains(30, 2, 1200 + instance);
            const double kappa = 0.3;
            const PolicySpec spec =
                solve_bewm(gains, PolicyClass::Ta, kappa, Backend::Enumerate);
            const auto oracle = testutil::best_box_welfare(gains.g, gains.v, &gains.c1,
                                                           &gains.c0, kappa);
            REQUIRE(oracle.feasible_exists);
            REQUIRE(spec.attained_welfare ==
                    doctest::Approx(oracle.welfare).epsilon(1e-12));
        }
    }
}

TEST_CASE("doubly robust scores route through the same machinery") {
    const GainVector gains = synthetic_gains(40, 2, 61);
    DrScoreSet scores;
    scores.gamma = -gains.g.cwiseAbs();
    scores.fold_id = Eigen::VectorXi::Zero(40);
    scores.folds = 5;
    const PolicySpec spec = solve_dr_ewm(scores, gains.v, gains.v_names, gains.pair,
                                         PolicyClass::Les, Backend::Enumerate);
    CHECK(spec.attained_welfare == 0.0);
    CHECK(labels_of(spec, gains.v).sum() == 0);

    scores.gamma = gains.g;
    const PolicySpec best = solve_dr_ewm(scores, gains.v, gains.v_names, gains.pair,
                                         PolicyClass::Les, Backend::Enumerate);
    const auto oracle = testutil::best_halfplane_welfare(gains.g, gains.v);
    CHECK(best.attained_welfare == doctest::Approx(oracle.welfare).epsilon(1e-12));
}

TEST_CASE("solver invariants") {
    SUBCASE("returned welfare dominates both constant rules") {
        for (int instance = 0; instance < 10; ++instance) {
            const GainVector gains = synthetic_gains(35, 2, 1300 + instance);
            const PolicySpec spec = solve_fewm(gains, PolicyClass::Les, Backend::Enumerate);
            CHECK(spec.attained_welfare >= 0.0 - 1e-15);
            CHECK(spec.attained_welfare >= gains.g.mean() - 1e-15);
        }
    }
    SUBCASE("positive rescaling keeps the chosen labeling optimal") {
        const GainVector gains = synthetic_gains(30, 2, 67);
        GainVector doubled = gains;
        doubled.g *= 2.0;
        const PolicySpec a = solve_fewm(gains, PolicyClass::Les, Backend::Enumerate);
        const PolicySpec b = solve_fewm(doubled, PolicyClass::Les, Backend::Enumerate);
        CHECK(b.attained_welfare == doctest::Approx(2.0 * a.attained_welfare).epsilon(1e-12));
        CHECK((labels_of(a, gains.v) - labels_of(b, gains.v)).cwiseAbs().sum() == 0);
    }
    SUBCASE("finer explicit candidate sets never lose welfare") {
        const GainVector gains = synthetic_gains(200, 1, 71);
        std::vector<Eigen::VectorXd> coarse, fine;
        for (int k = 1; k < 40; ++k) {
            Eigen::VectorXd theta(2);
            theta << -(-2.0 + 4.0 * k / 40.0), 1.0;
            fine.push_back(theta);
            if (k % 4 == 0) coarse.push_back(theta);
        }
        const PolicySpec lo = solve_les_candidates(gains.g, gains.v, gains.v_names,
                                                   gains.pair, coarse);
        const PolicySpec hi =
            solve_les_candidates(gains.g, gains.v, gains.v_names, gains.pair, fine);
        CHECK(hi.attained_welfare >= lo.attained_welfare - 1e-15);
    }
    SUBCASE("the single-feature sweep agrees with direct evaluation") {
        const GainVector gains = synthetic_gains(150, 1, 73);
        std::vector<Eigen::VectorXd> thetas;
        Rng rng(7, 7);
        for (int k = 0; k < 60; ++k) {
            Eigen::VectorXd theta(2);
            theta << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
            thetas.push_back(theta);
        }
        const PolicySpec spec = solve_les_candidates(gains.g, gains.v, gains.v_names,
                                                     gains.pair, thetas, &gains.c1,
                                                     &gains.c0, 0.4);
        REQUIRE_FALSE(spec.is_empty());
        const Eigen::VectorXi labels = labels_of(spec, gains.v);
        CHECK(welfare_of_labels(labels, gains.g) ==
              doctest::Approx(spec.attained_welfare).epsilon(1e-12));
        double budget = 0.0;
        for (int i = 0; i < gains.n(); ++i) {
            budget += labels(i) ? gains.c1(i) : gains.c0(i);
        }
        CHECK(budget / gains.n() == doctest::Approx(spec.attained_budget).epsilon(1e-12));
        CHECK(spec.attained_budget <= 0.4 + 1e-12);
    }
}

TEST_CASE("edge cases and errors") {
    GainVector empty;
    empty.v.resize(0, 2);
    CHECK_THROWS_AS(solve_fewm(empty, PolicyClass::Les, Backend::Enumerate), ConfigError);

    const GainVector wide = synthetic_gains(10, 4, 75);
    CHECK_THROWS_AS(solve_fewm(wide, PolicyClass::Les, Backend::Enumerate), ConfigError);
    CHECK_THROWS_AS(solve_ta(wide), ConfigError);
}

TEST_CASE("policy JSON round trip") {
    const GainVector gains = synthetic_gains(30, 2, 77);
    PolicySpec spec = solve_fewm(gains, PolicyClass::Les, Backend::Enumerate);
    spec.pair.alpha1 = Manipulation::parse("cap_subsidy(2.5)");
    const std::string text = policy_to_json(spec);
    const PolicySpec back = policy_from_json(text);
    CHECK(back.kind == spec.kind);
    CHECK((back.lambda - spec.lambda).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(back.pair.alpha1 == spec.pair.alpha1);
    CHECK(back.feature_names == spec.feature_names);
    CHECK(back.attained_welfare == doctest::Approx(spec.attained_welfare));
    for (int i = 0; i < 10; ++i) {
        CHECK(back.assign_features(gains.v.row(i)) == spec.assign_features(gains.v.row(i)));
    }

    PolicySpec ta = solve_ta(synthetic_gains(20, 2, 79));
    const PolicySpec ta_back = policy_from_json(policy_to_json(ta));
    CHECK(ta_back.kind == PolicySpec::Kind::Ta);
    CHECK((ta_back.thresholds - ta.thresholds).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((ta_back.signs - ta.signs).cwiseAbs().maxCoeff() == 0);
}

TEST_SUITE_END();
