#include <doctest.h>

#include <cstdio>

#include "ewmiv/dataset.hpp"
#include "ewmiv/errors.hpp"
#include "ewmiv/structural.hpp"
#include "ewmiv/text_config.hpp"
#include "helpers.hpp"

using namespace ewmiv;

TEST_SUITE_BEGIN("config_data");

TEST_CASE("text config parses sections, lists and comments") {
    const std::string text =
        "[alpha]\n"
        "name = \"hello world\"  # trailing comment\n"
        "grid = 1, 2.5, 3\n"
        "\n"
        "[alpha.nested]\n"
        "laws = uniform(0, 4), constant(1)\n";
    const TextConfig cfg = TextConfig::parse_string(text);
    CHECK(cfg.str("alpha", "name") == "hello world");
    CHECK(cfg.num_list("alpha", "grid") == std::vector<double>{1.0, 2.5, 3.0});
    const auto laws = cfg.str_list("alpha.nested", "laws");
    REQUIRE(laws.size() == 2);
    CHECK(laws[0] == "uniform(0, 4)");
    CHECK(cfg.sections_with_prefix("alpha").size() == 2);
    CHECK_THROWS_AS(cfg.num("alpha", "name"), ConfigError);
    CHECK_THROWS_AS((void)cfg.str("alpha", "missing"), ConfigError);
}

TEST_CASE("text config round trip is stable") {
    TextConfig cfg;
    cfg.set("a", "k1", "v1");
    cfg.set_num("a", "k2", 0.125);
    cfg.set_num_list("b.c", "grid", {1, 2, 3});
    const std::string once = cfg.to_string();
    CHECK(TextConfig::parse_string(once).to_string() == once);
}

TEST_CASE("malformed config lines raise") {
    CHECK_THROWS_AS(TextConfig::parse_string("[a\nk = v\n"), ConfigError);
    CHECK_THROWS_AS(TextConfig::parse_string("[a]\njust words\n"), ConfigError);
    CHECK_THROWS_AS(TextConfig::parse_string("k = v\n"), ConfigError);
}

TEST_CASE("dgp config round trip") {
    const StructuralDgp dgp = testutil::canonical_dgp();
    TextConfig cfg;
    dgp.to_config(cfg);
    const StructuralDgp back = StructuralDgp::from_config(cfg);
    Eigen::Vector2d x(1.0, 0.3);
    Eigen::Vector2d z(1.7, 0.4);
    CHECK(back.propensity(x, z) == doctest::Approx(dgp.propensity(x, z)).epsilon(1e-14));
    CHECK(back.outcome.mte(0.3, x) == doctest::Approx(dgp.outcome.mte(0.3, x)).epsilon(1e-14));
    CHECK(back.noise_scale == dgp.noise_scale);
}

TEST_CASE("sample CSV round trip keeps the schema") {
    const Sample s = sample_dgp(testutil::canonical_dgp(), 50, 11);
    const std::string path = "test_sample_roundtrip.csv";
    write_sample_csv(s, path);
    const Sample back = read_sample_csv(path);
    std::remove(path.c_str());
    REQUIRE(back.n() == s.n());
    REQUIRE(back.d_x() == s.d_x());
    REQUIRE(back.d_z() == s.d_z());
    REQUIRE(back.latent_u.has_value());
    for (int i = 0; i < s.n(); ++i) {
        CHECK(back.y(i) == doctest::Approx(s.y(i)).epsilon(1e-10));
        CHECK(back.d(i) == s.d(i));
        CHECK(back.x(i, 1) == doctest::Approx(s.x(i, 1)).epsilon(1e-10));
        CHECK(back.z(i, 0) == doctest::Approx(s.z(i, 0)).epsilon(1e-10));
    }
}

TEST_CASE("sample validation rejects bad shapes") {
    Sample s = sample_dgp(testutil::canonical_dgp(), 10, 3);
    SUBCASE("non-binary d") {
        s.d(3) = 2;
        CHECK_THROWS_AS(s.validate(), ConfigError);
    }
    SUBCASE("latent u out of range") {
        (*s.latent_u)(0) = 1.5;
        CHECK_THROWS_AS(s.validate(), ConfigError);
    }
    SUBCASE("length mismatch") {
        s.y.conservativeResize(9);
        CHECK_THROWS_AS(s.validate(), ConfigError);
    }
}

TEST_CASE("distribution spec parsing") {
    CHECK(MarginalDist::parse("uniform(0, 4)").mean() == doctest::Approx(2.0));
    CHECK(MarginalDist::parse("discrete(0:0.25, 2:0.75)").mean() == doctest::Approx(1.5));
    CHECK_THROWS_AS(MarginalDist::parse("uniform(4, 0)"), ConfigError);
    CHECK_THROWS_AS(MarginalDist::parse("triangle(0, 1)"), ConfigError);
    CHECK_THROWS_AS(MarginalDist::parse("discrete(0:0.5, 1:0.6)"), ConfigError);
    const MarginalDist lap = MarginalDist::parse("laplace(2, 0.7)");
    CHECK(lap.pdf(2.0) == doctest::Approx(1.0 / 1.4));
}

TEST_SUITE_END();
