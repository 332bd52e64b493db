#ifndef EWMIV_DISTRIBUTIONS_HPP
#define EWMIV_DISTRIBUTIONS_HPP

#include <string>
#include <utility>
#include <vector>

#include "ewmiv/random.hpp"

namespace ewmiv {

/**
 * One-dimensional marginal law used for covariate and instrument components.
 * Continuous kinds expose a Lebesgue density; discrete kinds expose atoms.
 */
class MarginalDist {
public:
    enum class Kind { Constant, Uniform, Normal, Bernoulli, Discrete, Laplace, Logistic };

    static MarginalDist constant(double v);
    static MarginalDist uniform(double a, double b);
    static MarginalDist normal(double mean, double sd);
    static MarginalDist bernoulli(double p);
    static MarginalDist discrete(std::vector<double> values, std::vector<double> probs);
    static MarginalDist laplace(double mu, double b);
    static MarginalDist logistic(double mu, double s);

    /// Text form, e.g. "uniform(0, 4)" or "discrete(0:0.3, 1:0.7)".
    static MarginalDist parse(const std::string& spec);
    std::string to_string() const;

    Kind kind() const { return kind_; }
    bool is_discrete() const;

    double sample(Rng& rng) const;
    double pdf(double t) const;  // continuous kinds only
    const std::vector<std::pair<double, double>>& atoms() const;  // discrete kinds only
    double mean() const;

    /// [lo, hi] covering the support; unbounded kinds are clipped at a
    /// negligible tail mass so integration grids stay finite.
    std::pair<double, double> support() const;

private:
    Kind kind_ = Kind::Constant;
    double a_ = 0.0, b_ = 0.0;
    std::vector<std::pair<double, double>> atoms_;
};

}  // namespace ewmiv

#endif
