#ifndef EWMIV_FEATURES_HPP
#define EWMIV_FEATURES_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ewmiv {

/// A reference to one column of an observation: covariate ("x3") or
/// instrument ("z1"). Indices in text form are 1-based, as in CSV headers.
struct ColumnRef {
    enum class Source { X, Z };
    Source source = Source::X;
    int index = 0;  // 0-based

    static ColumnRef parse(const std::string& name);
    std::string to_string() const;
    double value(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
    bool operator==(const ColumnRef&) const = default;
};

/// Product of column references; an empty factor list is the intercept "1".
struct FeatureTerm {
    std::vector<ColumnRef> factors;

    static FeatureTerm parse(const std::string& text);  // "1", "x2", "z1*z2"
    std::string to_string() const;
    double value(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
};

/**
 * An ordered list of feature terms defining a design row phi(x, z). Used for
 * parametric propensity models and for selection indexes.
 */
class FeatureMap {
public:
    FeatureMap() = default;
    explicit FeatureMap(std::vector<FeatureTerm> terms) : terms_(std::move(terms)) {}

    static FeatureMap parse(const std::vector<std::string>& term_names);
    /// Intercept, every x column, every z column.
    static FeatureMap default_linear(int d_x, int d_z);

    std::vector<std::string> term_names() const;
    int size() const { return static_cast<int>(terms_.size()); }

    Eigen::VectorXd row(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
    Eigen::MatrixXd design(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) const;

private:
    std::vector<FeatureTerm> terms_;
};

/// Subset of (x, z) columns, used to assemble policy features and extended
/// MTE covariates.
struct ColumnSelector {
    std::vector<ColumnRef> columns;

    static ColumnSelector parse(const std::vector<std::string>& names);
    std::vector<std::string> names() const;
    int size() const { return static_cast<int>(columns.size()); }
    Eigen::VectorXd row(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
    Eigen::MatrixXd matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) const;
};

}  // namespace ewmiv

#endif
