#ifndef EWMIV_DATASET_HPP
#define EWMIV_DATASET_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace ewmiv {

/**
 * An observed cross-section: outcome y, binary take-up d, covariates x
 * (n x d_x), instruments z (n x L). `latent_u` is populated only by the
 * simulator for diagnostics; no estimator reads it.
 */
struct Sample {
    Eigen::VectorXd y;
    Eigen::VectorXi d;
    Eigen::MatrixXd x;
    Eigen::MatrixXd z;
    std::optional<Eigen::VectorXd> latent_u;

    int n() const { return static_cast<int>(y.size()); }
    int d_x() const { return static_cast<int>(x.cols()); }
    int d_z() const { return static_cast<int>(z.cols()); }

    /// Throws ConfigError on shape mismatch, non-binary d, or u outside [0,1].
    void validate() const;

    Sample rows(const std::vector<int>& idx) const;
};

/// CSV with header `y,d,x1..xdx,z1..zL[,u]`.
Sample read_sample_csv(const std::string& path);
void write_sample_csv(const Sample& s, const std::string& path);

}  // namespace ewmiv

#endif
