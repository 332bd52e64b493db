#include <benchmark/benchmark.h>

#include "ewmiv/mte.hpp"
#include "ewmiv/policy.hpp"
#include "ewmiv/propensity.hpp"
#include "ewmiv/random.hpp"
#include "ewmiv/structural.hpp"
#include "ewmiv/welfare.hpp"

namespace {

using namespace ewmiv;

StructuralDgp bench_dgp() {
    StructuralDgp dgp;
    dgp.covariate_law = {MarginalDist::constant(1.0), MarginalDist::uniform(0.0, 1.0)};
    dgp.instrument_law = {MarginalDist::uniform(0.0, 4.0), MarginalDist::uniform(0.0, 2.0)};
    dgp.selection.link = SelectionIndex::Link::Logistic;
    dgp.selection.features = FeatureMap::parse({"x1", "x2", "z1", "z2"});
    dgp.selection.gamma = Eigen::Vector4d(0.6, 0.7, -1.1, 0.5);
    dgp.outcome.beta0 = Eigen::Vector2d(3.0, 0.4);
    dgp.outcome.beta1 = Eigen::Vector2d(3.2, 0.6);
    dgp.outcome.q0 = Polynomial({-0.2, 0.4});
    dgp.outcome.q1 = Polynomial({0.25, -0.5});
    dgp.noise_scale = 0.1;
    return dgp;
}

void rng_uniform(benchmark::State& state) {
    Rng rng(42);
    double acc = 0.0;
    for (auto _ : state) {
        acc += rng.uniform01();
        benchmark::DoNotOptimize(acc);
    }
}
BENCHMARK(rng_uniform);

void draw_sample(benchmark::State& state) {
    const StructuralDgp dgp = bench_dgp();
    const int n = static_cast<int>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_dgp(dgp, n, ++seed));
    }
}
BENCHMARK(draw_sample)->Arg(1000)->Arg(10000);

void logit_fit(benchmark::State& state) {
    const StructuralDgp dgp = bench_dgp();
    const Sample s = sample_dgp(dgp, static_cast<int>(state.range(0)), 7);
    const FeatureMap features = FeatureMap::parse({"x1", "x2", "z1", "z2"});
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_logit(s, features));
    }
}
BENCHMARK(logit_fit)->Arg(1000)->Arg(10000);

void local_poly_predict(benchmark::State& state) {
    const StructuralDgp dgp = bench_dgp();
    const Sample s = sample_dgp(dgp, static_cast<int>(state.range(0)), 9);
    const LocalPolyPropensity model = fit_local_poly(s, 1, 0.25);
    Eigen::Vector2d x(1.0, 0.5);
    Eigen::Vector2d z(2.0, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.predict(x, z));
    }
}
BENCHMARK(local_poly_predict)->Arg(1000)->Arg(10000);

void gain_construction(benchmark::State& state) {
    const StructuralDgp dgp = bench_dgp();
    const Sample s = sample_dgp(dgp, static_cast<int>(state.range(0)), 11);
    const OraclePropensity p(dgp);
    const OracleMte mte(dgp);
    ManipulationPair pair;
    pair.alpha1 = Manipulation::parse("cap_subsidy(2.5)");
    CostSpec cost;
    const ColumnSelector features = ColumnSelector::parse({"z1"});
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_gains(s, p, mte, pair, cost, features));
    }
}
BENCHMARK(gain_construction)->Arg(1000)->Arg(10000);

void fewm_enumerate(benchmark::State& state) {
    const StructuralDgp dgp = bench_dgp();
    const Sample s = sample_dgp(dgp, static_cast<int>(state.range(0)), 13);
    const OraclePropensity p(dgp);
    const OracleMte mte(dgp);
    ManipulationPair pair;
    pair.alpha1 = Manipulation::parse("cap_subsidy(2.5)");
    CostSpec cost;
    const GainVector gains = build_gains(s, p, mte, pair, cost, ColumnSelector::parse({"z1"}));
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_fewm(gains, PolicyClass::Les, Backend::Enumerate));
    }
}
BENCHMARK(fewm_enumerate)->Arg(250)->Arg(1000);

void threshold_sweep(benchmark::State& state) {
    const StructuralDgp dgp = bench_dgp();
    const Sample s = sample_dgp(dgp, static_cast<int>(state.range(0)), 17);
    const OraclePropensity p(dgp);
    const OracleMte mte(dgp);
    ManipulationPair pair;
    pair.alpha1 = Manipulation::parse("cap_subsidy(2.5)");
    CostSpec cost;
    const GainVector gains = build_gains(s, p, mte, pair, cost, ColumnSelector::parse({"z1"}));
    std::vector<Eigen::VectorXd> thetas;
    for (int k = 1; k < 2000; ++k) {
        Eigen::VectorXd theta(2);
        theta << -4.0 * k / 2000.0, 1.0;
        thetas.push_back(theta);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            solve_les_candidates(gains.g, gains.v, gains.v_names, pair, thetas));
    }
}
BENCHMARK(threshold_sweep)->Arg(4000)->Arg(50000);

}  // namespace

BENCHMARK_MAIN();
