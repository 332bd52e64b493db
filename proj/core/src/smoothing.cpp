#include "ewmiv/smoothing.hpp"

#include <algorithm>
#include <cmath>

#include "ewmiv/errors.hpp"

namespace ewmiv {

double Kernel::operator()(double u) const {
    switch (id) {
        case Id::Gaussian: return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI);
        case Id::Epanechnikov: return (std::abs(u) < 1.0) ? 0.75 * (1.0 - u * u) : 0.0;
    }
    return 0.0;
}

Kernel Kernel::parse(const std::string& name) {
    if (name == "gaussian") return Kernel{Id::Gaussian};
    if (name == "epanechnikov") return Kernel{Id::Epanechnikov};
    throw ConfigError("unknown kernel '" + name + "'");
}

std::string Kernel::to_string() const {
    return id == Id::Gaussian ? "gaussian" : "epanechnikov";
}

LocalLinear1DResult local_linear_1d(const Eigen::VectorXd& t, const Eigen::VectorXd& y,
                                    double t0, double bandwidth, Kernel kernel) {
    if (bandwidth <= 0) throw ConfigError("bandwidth must be positive");
    const Eigen::Index n = t.size();
    // Weighted moments of the design (1, t - t0).
    double s0 = 0, s1 = 0, s2 = 0, m0 = 0, m1 = 0;
    int eff = 0;
    const double tiny = kernel(4.0);  // weight floor marking "in the neighborhood"
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = (t(i) - t0) / bandwidth;
        const double w = kernel(u);
        if (w >= tiny) ++eff;
        const double dt = t(i) - t0;
        s0 += w;
        s1 += w * dt;
        s2 += w * dt * dt;
        m0 += w * y(i);
        m1 += w * dt * y(i);
    }
    LocalLinear1DResult res;
    res.effective_n = eff;
    const double det = s0 * s2 - s1 * s1;
    if (s0 <= 0 || std::abs(det) < 1e-300) {
        // Degenerate neighborhood: fall back to the weighted mean when any
        // weight exists, otherwise report zero mass.
        if (s0 > 0) res.level = m0 / s0;
        return res;
    }
    res.level = (s2 * m0 - s1 * m1) / det;
    res.slope = (s0 * m1 - s1 * m0) / det;
    return res;
}

std::vector<std::vector<int>> monomial_exponents(int dims, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(dims), 0);
    // Enumerate by total degree so the constant term comes first.
    for (int total = 0; total <= degree; ++total) {
        // Iterate compositions of `total` into `dims` parts.
        std::vector<int> comp(static_cast<std::size_t>(dims), 0);
        if (dims == 0) {
            if (total == 0) out.push_back({});
            continue;
        }
        comp[0] = total;
        while (true) {
            out.push_back(comp);
            // Next composition in colex order.
            int k = dims - 1;
            while (k > 0 && comp[static_cast<std::size_t>(k - 1)] == 0) --k;
            if (k == 0) break;
            --comp[static_cast<std::size_t>(k - 1)];
            const int rest = total;
            int used = 0;
            for (int j = 0; j < k; ++j) used += comp[static_cast<std::size_t>(j)];
            for (int j = k; j < dims; ++j) comp[static_cast<std::size_t>(j)] = 0;
            comp[static_cast<std::size_t>(k)] = rest - used;
        }
    }
    return out;
}

SortedSmoother1D::SortedSmoother1D(const Eigen::VectorXd& t, double bandwidth, Kernel kernel)
    : bandwidth_(bandwidth), kernel_(kernel) {
    if (bandwidth <= 0) throw ConfigError("bandwidth must be positive");
    const int n = static_cast<int>(t.size());
    order_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order_[static_cast<std::size_t>(i)] = i;
    std::sort(order_.begin(), order_.end(), [&](int a, int b) { return t(a) < t(b); });
    sorted_t_.resize(n);
    for (int i = 0; i < n; ++i) sorted_t_(i) = t(order_[static_cast<std::size_t>(i)]);
}

LocalLinear1DResult SortedSmoother1D::at(double t0, const Eigen::VectorXd& y) const {
    return at(t0, y, bandwidth_);
}

LocalLinear1DResult SortedSmoother1D::at(double t0, const Eigen::VectorXd& y,
                                         double bandwidth) const {
    // Gaussian weight below K(6) is treated as zero; the truncation error is
    // ~1e-8 relative, well under the estimation noise.
    const double reach = 6.0 * bandwidth;
    const int n = static_cast<int>(sorted_t_.size());
    const double* begin = sorted_t_.data();
    int lo = static_cast<int>(std::lower_bound(begin, begin + n, t0 - reach) - begin);
    int hi = static_cast<int>(std::upper_bound(begin, begin + n, t0 + reach) - begin);

    double s0 = 0, s1 = 0, s2 = 0, m0 = 0, m1 = 0;
    int eff = 0;
    const double floor_w = kernel_(4.0);
    for (int i = lo; i < hi; ++i) {
        const double dt = sorted_t_(i) - t0;
        const double w = kernel_(dt / bandwidth);
        if (w >= floor_w) ++eff;
        const double yi = y(order_[static_cast<std::size_t>(i)]);
        s0 += w;
        s1 += w * dt;
        s2 += w * dt * dt;
        m0 += w * yi;
        m1 += w * dt * yi;
    }
    LocalLinear1DResult res;
    res.effective_n = eff;
    const double det = s0 * s2 - s1 * s1;
    if (s0 <= 0 || std::abs(det) < 1e-300) {
        if (s0 > 0) res.level = m0 / s0;
        return res;
    }
    res.level = (s2 * m0 - s1 * m1) / det;
    res.slope = (s0 * m1 - s1 * m0) / det;
    return res;
}

Eigen::VectorXd SortedSmoother1D::fitted(const Eigen::VectorXd& y) const {
    return fitted(Eigen::MatrixXd(y)).col(0);
}

Eigen::MatrixXd SortedSmoother1D::fitted(const Eigen::MatrixXd& ys) const {
    const int n = static_cast<int>(sorted_t_.size());
    const int m = static_cast<int>(ys.cols());
    const double reach = 6.0 * bandwidth_;
    Eigen::MatrixXd out(n, m);
    Eigen::VectorXd m0(m), m1(m);

    int lo = 0, hi = 0;
    for (int q = 0; q < n; ++q) {
        const double t0 = sorted_t_(q);
        while (lo < n && sorted_t_(lo) < t0 - reach) ++lo;
        while (hi < n && sorted_t_(hi) <= t0 + reach) ++hi;

        double s0 = 0, s1 = 0, s2 = 0;
        m0.setZero();
        m1.setZero();
        for (int i = lo; i < hi; ++i) {
            const double dt = sorted_t_(i) - t0;
            const double w = kernel_(dt / bandwidth_);
            const int orig = order_[static_cast<std::size_t>(i)];
            s0 += w;
            s1 += w * dt;
            s2 += w * dt * dt;
            for (int j = 0; j < m; ++j) {
                const double yv = ys(orig, j);
                m0(j) += w * yv;
                m1(j) += w * dt * yv;
            }
        }
        const int orig_q = order_[static_cast<std::size_t>(q)];
        const double det = s0 * s2 - s1 * s1;
        for (int j = 0; j < m; ++j) {
            if (s0 <= 0) {
                out(orig_q, j) = 0.0;
            } else if (std::abs(det) < 1e-300) {
                out(orig_q, j) = m0(j) / s0;
            } else {
                out(orig_q, j) = (s2 * m0(j) - s1 * m1(j)) / det;
            }
        }
    }
    return out;
}

LocalPolyResult local_poly_at(const Eigen::MatrixXd& pts, const Eigen::VectorXd& y,
                              const Eigen::RowVectorXd& query, int degree, double bandwidth,
                              Kernel kernel) {
    if (bandwidth <= 0) throw ConfigError("bandwidth must be positive");
    const Eigen::Index n = pts.rows();
    const int d = static_cast<int>(pts.cols());
    const auto exps = monomial_exponents(d, degree);
    const int p = static_cast<int>(exps.size());

    Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd basis(p);
    int eff = 0;
    const double tiny = kernel(4.0);

    for (Eigen::Index i = 0; i < n; ++i) {
        double w = 1.0;
        for (int j = 0; j < d; ++j) w *= kernel((pts(i, j) - query(j)) / bandwidth);
        if (w <= 0) continue;
        if (w >= std::pow(tiny, d)) ++eff;
        for (int t = 0; t < p; ++t) {
            double v = 1.0;
            for (int j = 0; j < d; ++j) {
                const int e = exps[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
                for (int r = 0; r < e; ++r) v *= (pts(i, j) - query(j)) / bandwidth;
            }
            basis(t) = v;
        }
        moment.noalias() += w * basis * basis.transpose();
        rhs.noalias() += w * basis * y(i);
    }

    const double scale = static_cast<double>(n) * std::pow(bandwidth, d);
    const Eigen::MatrixXd b_mat = moment / scale;

    LocalPolyResult res;
    res.effective_n = eff;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b_mat);
    res.lambda_min = eig.eigenvalues().minCoeff();
    res.gradient = Eigen::VectorXd::Zero(d);

    if (res.lambda_min <= 0 || moment.norm() == 0) {
        return res;  // callers trim on lambda_min
    }
    const Eigen::VectorXd coef = b_mat.ldlt().solve(rhs / scale);
    res.value = coef(0);
    if (degree >= 1) {
        // First-order terms directly follow the constant in graded order.
        for (int j = 0; j < d; ++j) res.gradient(j) = coef(1 + j) / bandwidth;
    }
    return res;
}

}  // namespace ewmiv
