#ifndef EWMIV_TESTS_HELPERS_HPP
#define EWMIV_TESTS_HELPERS_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "ewmiv/structural.hpp"

namespace testutil {

/**
 * Fixed synthetic process used across the test suite:
 *   X = (1, X2), X2 ~ U[0,1]; Z = (Z1, Z2), Z1 ~ U[0,4], Z2 ~ U[0,2];
 *   p(x,z) = logistic(0.6 + 0.7 x2 - 1.1 z1 + 0.5 z2);
 *   m_d(x,u) = x'beta_d + theta_d (1 - 2u), beta0 = (3.0, 0.4),
 *   beta1 = (3.2, 0.6), theta0 = -0.2, theta1 = 0.25; noise sd 0.1.
 * MTE(u,x) = 0.65 + 0.2 x2 - 0.9 u, so encouragement helps low-u margins
 * and hurts high-u ones.
 */
inline ewmiv::StructuralDgp canonical_dgp() {
    using ewmiv::MarginalDist;
    ewmiv::StructuralDgp dgp;
    dgp.covariate_law = {MarginalDist::constant(1.0), MarginalDist::uniform(0.0, 1.0)};
    dgp.instrument_law = {MarginalDist::uniform(0.0, 4.0), MarginalDist::uniform(0.0, 2.0)};
    dgp.selection.link = ewmiv::SelectionIndex::Link::Logistic;
    dgp.selection.features = ewmiv::FeatureMap::parse({"x1", "x2", "z1", "z2"});
    dgp.selection.gamma = Eigen::Vector4d(0.6, 0.7, -1.1, 0.5);
    dgp.outcome.beta0 = Eigen::Vector2d(3.0, 0.4);
    dgp.outcome.beta1 = Eigen::Vector2d(3.2, 0.6);
    dgp.outcome.q0 = ewmiv::Polynomial({-0.2, 0.4});
    dgp.outcome.q1 = ewmiv::Polynomial({0.25, -0.5});
    dgp.noise_scale = 0.1;
    return dgp;
}

/// True coefficients of the conditional-mean regression
/// E[Y | x, p=u] = u x'b1 + (1-u) x'b0 + eta2 u^2 implied by canonical_dgp.
inline Eigen::VectorXd canonical_poly_mte_truth() {
    Eigen::VectorXd theta(5);
    theta << 3.0, 0.4, 3.65, 0.6, -0.45;  // b0, b1 (+ absorbed u-slope), eta2
    return theta;
}

/// Selection exactly logistic in wide-ranging features, so maximum
/// likelihood recovers the coefficients tightly at moderate n.
inline ewmiv::StructuralDgp logit_recovery_dgp() {
    using ewmiv::MarginalDist;
    ewmiv::StructuralDgp dgp;
    dgp.covariate_law = {MarginalDist::constant(1.0), MarginalDist::uniform(-2.0, 2.0)};
    dgp.instrument_law = {MarginalDist::uniform(-3.0, 3.0), MarginalDist::uniform(-2.0, 2.0)};
    dgp.selection.link = ewmiv::SelectionIndex::Link::Logistic;
    dgp.selection.features = ewmiv::FeatureMap::parse({"x1", "x2", "z1", "z2"});
    dgp.selection.gamma = Eigen::Vector4d(0.3, 0.4, -0.6, 0.5);
    dgp.outcome.beta0 = Eigen::Vector2d(1.0, 0.2);
    dgp.outcome.beta1 = Eigen::Vector2d(1.2, 0.3);
    dgp.outcome.q0 = ewmiv::Polynomial({-0.1, 0.2});
    dgp.outcome.q1 = ewmiv::Polynomial({0.15, -0.3});
    dgp.noise_scale = 0.1;
    return dgp;
}

/// Variant with a Laplace-distributed manipulable instrument so that shift
/// manipulations keep a bounded closed-form density ratio.
inline ewmiv::StructuralDgp laplace_dgp() {
    ewmiv::StructuralDgp dgp = canonical_dgp();
    dgp.instrument_law[0] = ewmiv::MarginalDist::laplace(2.0, 0.7);
    return dgp;
}

/// Binary instrument, three discrete covariate cells, monotone propensity.
inline ewmiv::StructuralDgp binary_iv_dgp() {
    using ewmiv::MarginalDist;
    ewmiv::StructuralDgp dgp;
    dgp.covariate_law = {MarginalDist::constant(1.0),
                         MarginalDist::discrete({0.0, 1.0, 2.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3})};
    dgp.instrument_law = {MarginalDist::bernoulli(0.5)};
    dgp.selection.link = ewmiv::SelectionIndex::Link::Logistic;
    dgp.selection.features = ewmiv::FeatureMap::parse({"x1", "x2", "z1"});
    dgp.selection.gamma = Eigen::Vector3d(-0.3, 0.4, 1.2);
    dgp.outcome.beta0 = Eigen::Vector2d(1.0, 0.3);
    dgp.outcome.beta1 = Eigen::Vector2d(1.4, 0.5);
    dgp.outcome.q0 = ewmiv::Polynomial({0.1, -0.2});
    dgp.outcome.q1 = ewmiv::Polynomial({0.6, -1.1});
    dgp.noise_scale = 0.1;
    return dgp;
}

/// Gauss-Legendre nodes/weights on [a, b].
inline std::vector<std::pair<double, double>> gauss_legendre(int n, double a, double b) {
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        // Newton iteration from the Chebyshev-based initial guess.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            const double dp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
        }
        const double dp = n * (x * p0 - p1) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.emplace_back(0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w);
    }
    return out;
}

/**
 * Tensor-product quadrature of E[f(X, Z)] over the product law of a
 * generating process: exact sums over discrete components, 48-node
 * Gauss-Legendre over continuous ones. Independent of the sampling path.
 */
inline double quadrature_mean(
    const ewmiv::StructuralDgp& dgp,
    const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& f) {
    const int dx = dgp.d_x();
    const int dz = dgp.d_z();
    std::vector<std::vector<std::pair<double, double>>> grids;
    for (int j = 0; j < dx + dz; ++j) {
        const ewmiv::MarginalDist& law = (j < dx)
                                             ? dgp.covariate_law[static_cast<std::size_t>(j)]
                                             : dgp.instrument_law[static_cast<std::size_t>(j - dx)];
        if (law.is_discrete()) {
            grids.push_back(law.atoms());
        } else {
            const auto [lo, hi] = law.support();
            auto nodes = gauss_legendre(48, lo, hi);
            for (auto& [t, w] : nodes) w *= law.pdf(t);
            grids.push_back(std::move(nodes));
        }
    }

    Eigen::VectorXd x(dx), z(dz);
    double total = 0.0;
    std::function<void(int, double)> rec = [&](int dim, double weight) {
        if (dim == dx + dz) {
            total += weight * f(x, z);
            return;
        }
        for (const auto& [t, w] : grids[static_cast<std::size_t>(dim)]) {
            if (dim < dx) {
                x(dim) = t;
            } else {
                z(dim - dx) = t;
            }
            rec(dim + 1, weight * w);
        }
    };
    rec(0, 1.0);
    return total;
}

}  // namespace testutil

#endif
