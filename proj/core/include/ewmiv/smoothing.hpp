#ifndef EWMIV_SMOOTHING_HPP
#define EWMIV_SMOOTHING_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ewmiv {

struct Kernel {
    enum class Id { Gaussian, Epanechnikov };
    Id id = Id::Gaussian;

    double operator()(double u) const;
    static Kernel parse(const std::string& name);
    std::string to_string() const;
};

/// Level and slope of a locally linear fit of y on scalar t at t0, plus the
/// number of observations carrying non-negligible weight.
struct LocalLinear1DResult {
    double level = 0.0;
    double slope = 0.0;
    int effective_n = 0;
};

LocalLinear1DResult local_linear_1d(const Eigen::VectorXd& t, const Eigen::VectorXd& y,
                                    double t0, double bandwidth, Kernel kernel);

/// All monomial exponent vectors over `dims` variables with total degree
/// <= degree, in graded lexicographic order (constant first).
std::vector<std::vector<int>> monomial_exponents(int dims, int degree);

/**
 * Local polynomial regression at a query point over a multivariate design.
 * The scaled moment matrix B = (n h^d)^{-1} sum_i U_i U_i' K_i is formed
 * with basis U_i of monomials in (pts_i - q)/h; `value` is the local
 * intercept and `lambda_min` the smallest eigenvalue of B, which callers
 * use for trimming.
 */
struct LocalPolyResult {
    double value = 0.0;
    double lambda_min = 0.0;
    Eigen::VectorXd gradient;  // first-order coefficients / h (degree >= 1)
    int effective_n = 0;
};

LocalPolyResult local_poly_at(const Eigen::MatrixXd& pts, const Eigen::VectorXd& y,
                              const Eigen::RowVectorXd& query, int degree, double bandwidth,
                              Kernel kernel);

/**
 * Locally linear smoother over a scalar regressor with the points kept
 * sorted, so each query only touches the window where the (truncated)
 * Gaussian weight is non-negligible. Responses are passed per call in the
 * original observation order; the smoother itself is immutable.
 */
class SortedSmoother1D {
public:
    SortedSmoother1D(const Eigen::VectorXd& t, double bandwidth, Kernel kernel = Kernel{});

    LocalLinear1DResult at(double t0, const Eigen::VectorXd& y) const;
    LocalLinear1DResult at(double t0, const Eigen::VectorXd& y, double bandwidth) const;
    /// Fitted values at every training point.
    Eigen::VectorXd fitted(const Eigen::VectorXd& y) const;
    /// Same, for several response columns sharing one weight pass.
    Eigen::MatrixXd fitted(const Eigen::MatrixXd& ys) const;

    double bandwidth() const { return bandwidth_; }

private:
    Eigen::VectorXd sorted_t_;
    std::vector<int> order_;  // sorted position -> original index
    double bandwidth_;
    Kernel kernel_;
};

}  // namespace ewmiv

#endif
