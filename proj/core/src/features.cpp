#include "ewmiv/features.hpp"

#include <cstdlib>

#include "ewmiv/errors.hpp"

namespace ewmiv {

ColumnRef ColumnRef::parse(const std::string& name) {
    if (name.size() < 2 || (name[0] != 'x' && name[0] != 'z')) {
        throw ConfigError("bad column name '" + name + "' (expected x<k> or z<k>)");
    }
    char* end = nullptr;
    const long idx = std::strtol(name.c_str() + 1, &end, 10);
    if (*end != '\0' || idx < 1) {
        throw ConfigError("bad column name '" + name + "' (expected x<k> or z<k>)");
    }
    ColumnRef ref;
    ref.source = (name[0] == 'x') ? Source::X : Source::Z;
    ref.index = static_cast<int>(idx) - 1;
    return ref;
}

std::string ColumnRef::to_string() const {
    return (source == Source::X ? "x" : "z") + std::to_string(index + 1);
}

double ColumnRef::value(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    const Eigen::VectorXd& v = (source == Source::X) ? x : z;
    if (index >= v.size()) {
        throw ConfigError("column " + to_string() + " out of range (have " +
                          std::to_string(v.size()) + ")");
    }
    return v(index);
}

FeatureTerm FeatureTerm::parse(const std::string& text) {
    FeatureTerm term;
    if (text == "1") return term;
    std::string cur;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '*') {
            if (!cur.empty()) term.factors.push_back(ColumnRef::parse(cur));
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(text[i]))) {
            cur.push_back(text[i]);
        }
    }
    if (term.factors.empty()) throw ConfigError("empty feature term in '" + text + "'");
    return term;
}

std::string FeatureTerm::to_string() const {
    if (factors.empty()) return "1";
    std::string out;
    for (std::size_t i = 0; i < factors.size(); ++i) {
        if (i) out += "*";
        out += factors[i].to_string();
    }
    return out;
}

double FeatureTerm::value(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    double v = 1.0;
    for (const auto& f : factors) v *= f.value(x, z);
    return v;
}

FeatureMap FeatureMap::parse(const std::vector<std::string>& term_names) {
    std::vector<FeatureTerm> terms;
    terms.reserve(term_names.size());
    for (const auto& t : term_names) terms.push_back(FeatureTerm::parse(t));
    return FeatureMap(std::move(terms));
}

FeatureMap FeatureMap::default_linear(int d_x, int d_z) {
    std::vector<FeatureTerm> terms;
    terms.push_back(FeatureTerm{});  // intercept
    for (int j = 0; j < d_x; ++j) {
        terms.push_back(FeatureTerm{{ColumnRef{ColumnRef::Source::X, j}}});
    }
    for (int j = 0; j < d_z; ++j) {
        terms.push_back(FeatureTerm{{ColumnRef{ColumnRef::Source::Z, j}}});
    }
    return FeatureMap(std::move(terms));
}

std::vector<std::string> FeatureMap::term_names() const {
    std::vector<std::string> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) out.push_back(t.to_string());
    return out;
}

Eigen::VectorXd FeatureMap::row(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    Eigen::VectorXd out(size());
    for (int j = 0; j < size(); ++j) out(j) = terms_[static_cast<std::size_t>(j)].value(x, z);
    return out;
}

Eigen::MatrixXd FeatureMap::design(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) const {
    Eigen::MatrixXd out(x.rows(), size());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out.row(i) = row(x.row(i), z.row(i)).transpose();
    }
    return out;
}

ColumnSelector ColumnSelector::parse(const std::vector<std::string>& names) {
    ColumnSelector sel;
    sel.columns.reserve(names.size());
    for (const auto& n : names) sel.columns.push_back(ColumnRef::parse(n));
    return sel;
}

std::vector<std::string> ColumnSelector::names() const {
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.to_string());
    return out;
}

Eigen::VectorXd ColumnSelector::row(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    Eigen::VectorXd out(size());
    for (int j = 0; j < size(); ++j) out(j) = columns[static_cast<std::size_t>(j)].value(x, z);
    return out;
}

Eigen::MatrixXd ColumnSelector::matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) const {
    Eigen::MatrixXd out(x.rows(), size());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out.row(i) = row(x.row(i), z.row(i)).transpose();
    }
    return out;
}

}  // namespace ewmiv
