#include "ewmiv/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "ewmiv/errors.hpp"

namespace ewmiv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd normalize_sup(Eigen::VectorXd theta) {
    const double m = theta.lpNorm<Eigen::Infinity>();
    if (m < 1e-300) {
        // Degenerate direction acts as the all-ones rule.
        Eigen::VectorXd one = Eigen::VectorXd::Zero(theta.size());
        one(0) = 1.0;
        return one;
    }
    return theta / m;
}

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index j = 0; j < std::min(a.size(), b.size()); ++j) {
        if (a(j) < b(j)) return true;
        if (a(j) > b(j)) return false;
    }
    return a.size() < b.size();
}

/// Shared bookkeeping for candidate search with the documented tie-break:
/// highest welfare, then smallest eligible share, then lexicographically
/// smallest parameter vector.
struct BestTracker {
    double welfare = -kInf;
    double share = kInf;
    Eigen::VectorXd params;
    bool found = false;

    bool offer(double w, double s, const Eigen::VectorXd& p) {
        if (found) {
            if (w < welfare) return false;
            if (w == welfare) {
                if (s > share) return false;
                if (s == share && !lex_less(p, params)) return false;
            }
        }
        welfare = w;
        share = s;
        params = p;
        found = true;
        return true;
    }
};

struct BudgetView {
    const Eigen::VectorXd* c1 = nullptr;
    const Eigen::VectorXd* c0 = nullptr;
    double kappa = kInf;

    bool active() const { return c1 != nullptr && std::isfinite(kappa); }
};

struct LesEval {
    double welfare = 0.0;
    double budget = 0.0;
    double share = 0.0;
    bool feasible = true;
};

LesEval evaluate_les(const Eigen::VectorXd& theta, const Eigen::VectorXd& obj,
                     const Eigen::MatrixXd& v, const BudgetView& budget) {
    const int n = static_cast<int>(obj.size());
    LesEval ev;
    double base_cost = 0.0;
    for (int i = 0; i < n; ++i) {
        double score = theta(0);
        for (Eigen::Index j = 0; j < v.cols(); ++j) score += theta(j + 1) * v(i, j);
        const bool in = score >= 0.0;
        if (in) {
            ev.welfare += obj(i);
            ev.share += 1.0;
            if (budget.c1) ev.budget += (*budget.c1)(i);
        } else if (budget.c0) {
            ev.budget += (*budget.c0)(i);
        }
        (void)base_cost;
    }
    ev.welfare /= n;
    ev.share /= n;
    ev.budget = budget.c1 ? ev.budget / n : 0.0;
    if (budget.active()) ev.feasible = ev.budget <= budget.kappa + 1e-12;
    return ev;
}

/// Hyperplanes through every affinely independent subset of up to d points,
/// each tilted to put the touched points on every side combination.
template <typename Fn>
void for_each_subset_hyperplane(const Eigen::MatrixXd& v, double eps_tie, Fn&& emit) {
    const int n = static_cast<int>(v.rows());
    const int d = static_cast<int>(v.cols());

    std::vector<int> subset;
    auto process_subset = [&](const std::vector<int>& rows) {
        const int k = static_cast<int>(rows.size());
        Eigen::MatrixXd a(k, d + 1);
        for (int r = 0; r < k; ++r) {
            a(r, 0) = 1.0;
            a.row(r).segment(1, d) = v.row(rows[static_cast<std::size_t>(r)]);
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV | Eigen::ComputeFullU);
        svd.setThreshold(1e-12);
        if (svd.rank() < k) return;  // affinely dependent subset

        for (int null_col = k; null_col <= d; ++null_col) {
            const Eigen::VectorXd base = svd.matrixV().col(null_col);
            for (int orient = 0; orient < 2; ++orient) {
                const Eigen::VectorXd oriented = orient ? (-base).eval() : base;
                for (int mask = 0; mask < (1 << k); ++mask) {
                    Eigen::VectorXd target(k);
                    for (int r = 0; r < k; ++r) {
                        target(r) = ((mask >> r) & 1) ? eps_tie : -eps_tie;
                    }
                    // Least-norm correction putting each touched point at the
                    // requested signed distance; off-plane points are
                    // unaffected at order eps_tie.
                    const Eigen::VectorXd theta = oriented + svd.solve(target);
                    emit(theta);
                }
            }
        }
    };

    // All subsets of size 1..d.
    std::vector<int> idx;
    std::function<void(int, int)> rec = [&](int start, int remaining) {
        if (remaining == 0) {
            process_subset(idx);
            return;
        }
        for (int i = start; i <= n - remaining; ++i) {
            idx.push_back(i);
            rec(i + 1, remaining - 1);
            idx.pop_back();
        }
    };
    for (int k = 1; k <= d; ++k) {
        idx.clear();
        rec(0, k);
    }
}

PolicySpec make_les_spec(const Eigen::VectorXd& theta, const Eigen::VectorXd& obj,
                         const Eigen::MatrixXd& v, const BudgetView& budget,
                         const std::vector<std::string>& names, const ManipulationPair& pair) {
    PolicySpec spec;
    spec.kind = PolicySpec::Kind::Les;
    spec.lambda = theta;
    spec.pair = pair;
    spec.feature_names = names;
    const LesEval ev = evaluate_les(theta, obj, v, budget);
    spec.attained_welfare = ev.welfare;
    spec.attained_budget = budget.c1 ? ev.budget : 0.0;
    return spec;
}

PolicySpec solve_les_enumerate(const Eigen::VectorXd& obj, const Eigen::MatrixXd& v,
                               const std::vector<std::string>& names,
                               const ManipulationPair& pair, const BudgetView& budget,
                               const SolveOptions& opts) {
    const int d = static_cast<int>(v.cols());
    if (d > 3) {
        throw ConfigError("enumerate backend supports at most 3 policy features (got " +
                          std::to_string(d) + "); use the milp backend");
    }

    BestTracker best;
    auto consider = [&](const Eigen::VectorXd& raw_theta) {
        const Eigen::VectorXd theta = normalize_sup(raw_theta);
        const LesEval ev = evaluate_les(theta, obj, v, budget);
        if (!ev.feasible) return;
        best.offer(ev.welfare, ev.share, theta);
    };

    Eigen::VectorXd all_in = Eigen::VectorXd::Zero(d + 1);
    all_in(0) = 1.0;
    consider(all_in);
    consider((-all_in).eval());
    for_each_subset_hyperplane(v, opts.eps_tie, consider);

    if (!best.found) return PolicySpec{};  // nothing feasible
    return make_les_spec(best.params, obj, v, budget, names, pair);
}

// ---------------------------------------------------------------------------
// Dense simplex (max c'x, Gx <= h, x >= 0, h >= 0 so the origin is feasible).

struct SimplexResult {
    bool bounded = true;
    double value = 0.0;
    Eigen::VectorXd x;
};

SimplexResult simplex_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& g,
                          const Eigen::VectorXd& h) {
    const int m = static_cast<int>(g.rows());
    const int nv = static_cast<int>(g.cols());
    // Tableau with slack basis: [G I | h; -c 0 | 0].
    Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m + 1, nv + m + 1);
    tab.block(0, 0, m, nv) = g;
    tab.block(0, nv, m, m).setIdentity();
    tab.block(0, nv + m, m, 1) = h;
    tab.block(m, 0, 1, nv) = -c.transpose();

    std::vector<int> basis(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = nv + i;

    for (int iter = 0; iter < 10000; ++iter) {
        // Bland's rule: first improving column.
        int pivot_col = -1;
        for (int j = 0; j < nv + m; ++j) {
            if (tab(m, j) < -1e-11) {
                pivot_col = j;
                break;
            }
        }
        if (pivot_col < 0) break;  // optimal

        int pivot_row = -1;
        double best_ratio = kInf;
        for (int i = 0; i < m; ++i) {
            if (tab(i, pivot_col) > 1e-11) {
                const double ratio = tab(i, nv + m) / tab(i, pivot_col);
                if (ratio < best_ratio - 1e-12 ||
                    (std::abs(ratio - best_ratio) <= 1e-12 && pivot_row >= 0 &&
                     basis[static_cast<std::size_t>(i)] <
                         basis[static_cast<std::size_t>(pivot_row)])) {
                    best_ratio = ratio;
                    pivot_row = i;
                }
            }
        }
        if (pivot_row < 0) return {false, kInf, {}};  // unbounded

        tab.row(pivot_row) /= tab(pivot_row, pivot_col);
        for (int i = 0; i <= m; ++i) {
            if (i == pivot_row) continue;
            const double f = tab(i, pivot_col);
            if (f != 0.0) tab.row(i) -= f * tab.row(pivot_row);
        }
        basis[static_cast<std::size_t>(pivot_row)] = pivot_col;
    }

    SimplexResult res;
    res.x = Eigen::VectorXd::Zero(nv);
    for (int i = 0; i < m; ++i) {
        if (basis[static_cast<std::size_t>(i)] < nv) {
            res.x(basis[static_cast<std::size_t>(i)]) = tab(i, nv + m);
        }
    }
    res.value = tab(m, nv + m);
    return res;
}

/// Is the partial labeling realizable by 1{theta'(1,v) >= 0} with
/// coefficients in [-1,1] and margin delta on the excluded side? On success
/// returns a realizing theta.
bool les_labeling_feasible(const Eigen::MatrixXd& v, const std::vector<int>& rows,
                           const std::vector<char>& labels, double delta,
                           Eigen::VectorXd* theta_out) {
    const int d = static_cast<int>(v.cols());
    const int k = static_cast<int>(rows.size());
    if (k == 0) {
        if (theta_out) {
            *theta_out = Eigen::VectorXd::Zero(d + 1);
            (*theta_out)(0) = 1.0;
        }
        return true;
    }

    double max_row_l1 = 1.0;
    for (int r = 0; r < k; ++r) {
        max_row_l1 = std::max(max_row_l1,
                              1.0 + v.row(rows[static_cast<std::size_t>(r)]).cwiseAbs().sum());
    }
    const double shift = 2.0 * max_row_l1 + 1.0;  // slack offset keeping the origin feasible

    // Variables: u_0..u_d in [0,2] (theta = u - 1), s in [0, shift+1]
    // (slack t = s - shift). Maximize s; feasible labeling iff t* >= 0.
    const int nv = d + 2;
    const int m = k + nv;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, nv);
    Eigen::VectorXd h(m);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(nv);
    c(nv - 1) = 1.0;

    for (int r = 0; r < k; ++r) {
        Eigen::VectorXd vt(d + 1);
        vt(0) = 1.0;
        vt.segment(1, d) = v.row(rows[static_cast<std::size_t>(r)]);
        const double sum_vt = vt.sum();
        if (labels[static_cast<std::size_t>(r)]) {
            // theta'vt >= t  ->  -vt'u + s <= shift - sum_vt
            g.row(r).segment(0, d + 1) = -vt.transpose();
            g(r, nv - 1) = 1.0;
            h(r) = shift - sum_vt;
        } else {
            // theta'vt <= -delta - t  ->  vt'u + s <= shift - delta + sum_vt
            g.row(r).segment(0, d + 1) = vt.transpose();
            g(r, nv - 1) = 1.0;
            h(r) = shift - delta + sum_vt;
        }
    }
    for (int j = 0; j < d + 1; ++j) {
        g(k + j, j) = 1.0;
        h(k + j) = 2.0;
    }
    g(k + d + 1, nv - 1) = 1.0;
    h(k + d + 1) = shift + 1.0;

    const SimplexResult res = simplex_max(c, g, h);
    const double t_star = res.value - shift;
    if (t_star < 0.0) return false;
    if (theta_out) {
        Eigen::VectorXd theta = res.x.segment(0, d + 1).array() - 1.0;
        *theta_out = theta;
    }
    return true;
}

PolicySpec solve_les_milp(const Eigen::VectorXd& obj, const Eigen::MatrixXd& v,
                          const std::vector<std::string>& names, const ManipulationPair& pair,
                          const BudgetView& budget, const SolveOptions& opts) {
    const int n = static_cast<int>(obj.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return std::abs(obj(a)) > std::abs(obj(b)); });

    // Suffix sums of attainable positive welfare and unavoidable cost.
    std::vector<double> pos_suffix(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<double> min_cost_suffix(static_cast<std::size_t>(n + 1), 0.0);
    for (int i = n - 1; i >= 0; --i) {
        const int row = order[static_cast<std::size_t>(i)];
        pos_suffix[static_cast<std::size_t>(i)] =
            pos_suffix[static_cast<std::size_t>(i + 1)] + std::max(0.0, obj(row));
        double mc = 0.0;
        if (budget.active()) mc = std::min((*budget.c1)(row), (*budget.c0)(row));
        min_cost_suffix[static_cast<std::size_t>(i)] =
            min_cost_suffix[static_cast<std::size_t>(i + 1)] + mc;
    }

    double best_welfare = -kInf;
    Eigen::VectorXd best_theta;
    bool found = false;

    std::vector<int> fixed_rows;
    std::vector<char> fixed_labels;

    std::function<void(int, double, double)> recurse = [&](int depth, double welfare_sum,
                                                           double cost_sum) {
        const double upper =
            (welfare_sum + pos_suffix[static_cast<std::size_t>(depth)]) / n;
        if (found && upper <= best_welfare + 1e-15) return;
        if (budget.active() &&
            (cost_sum + min_cost_suffix[static_cast<std::size_t>(depth)]) / n >
                budget.kappa + 1e-12) {
            return;
        }

        Eigen::VectorXd theta;
        if (!les_labeling_feasible(v, fixed_rows, fixed_labels, opts.delta_margin, &theta)) {
            return;
        }

        if (depth == n) {
            if (budget.active() && cost_sum / n > budget.kappa + 1e-12) return;
            const double w = welfare_sum / n;
            if (!found || w > best_welfare + 1e-15) {
                best_welfare = w;
                best_theta = theta;
                found = true;
            }
            return;
        }

        const int row = order[static_cast<std::size_t>(depth)];
        const int preferred = obj(row) > 0 ? 1 : 0;
        for (int attempt = 0; attempt < 2; ++attempt) {
            const int label = attempt == 0 ? preferred : 1 - preferred;
            fixed_rows.push_back(row);
            fixed_labels.push_back(static_cast<char>(label));
            double add_cost = 0.0;
            if (budget.active()) add_cost = label ? (*budget.c1)(row) : (*budget.c0)(row);
            recurse(depth + 1, welfare_sum + (label ? obj(row) : 0.0), cost_sum + add_cost);
            fixed_rows.pop_back();
            fixed_labels.pop_back();
        }
    };
    recurse(0, 0.0, 0.0);

    if (!found) return PolicySpec{};
    return make_les_spec(normalize_sup(best_theta), obj, v, budget, names, pair);
}

PolicySpec solve_les(const Eigen::VectorXd& obj, const Eigen::MatrixXd& v,
                     const std::vector<std::string>& names, const ManipulationPair& pair,
                     const BudgetView& budget, Backend backend, const SolveOptions& opts) {
    if (obj.size() == 0) throw ConfigError("cannot optimize over an empty sample");
    if (backend == Backend::Enumerate) {
        return solve_les_enumerate(obj, v, names, pair, budget, opts);
    }
    return solve_les_milp(obj, v, names, pair, budget, opts);
}

// ---------------------------------------------------------------------------
// Threshold allocations

PolicySpec solve_ta_impl(const Eigen::VectorXd& obj, const Eigen::MatrixXd& v,
                         const std::vector<std::string>& names, const ManipulationPair& pair,
                         const BudgetView& budget) {
    if (obj.size() == 0) throw ConfigError("cannot optimize over an empty sample");
    const int n = static_cast<int>(obj.size());
    const int d = static_cast<int>(v.cols());
    if (d > 3) {
        throw ConfigError("threshold allocation search supports at most 3 features (got " +
                          std::to_string(d) + ")");
    }

    // Candidate thresholds per coordinate and sign: each observed value of
    // sigma_k v_k, plus a sentinel below the minimum that empties the box.
    BestTracker best;
    Eigen::VectorXi best_signs;
    Eigen::VectorXd best_thresholds;

    std::vector<std::vector<double>> levels(static_cast<std::size_t>(d));
    Eigen::VectorXi signs(d);
    Eigen::VectorXd thresholds(d);
    std::vector<char> in(static_cast<std::size_t>(n));

    std::function<void(int)> search = [&](int coord) {
        if (coord == d) {
            double welfare = 0.0, share = 0.0, cost = 0.0;
            for (int i = 0; i < n; ++i) {
                bool inside = true;
                for (int k = 0; k < d && inside; ++k) {
                    inside = signs(k) * v(i, k) <= thresholds(k);
                }
                if (inside) {
                    welfare += obj(i);
                    share += 1.0;
                    if (budget.c1) cost += (*budget.c1)(i);
                } else if (budget.c0) {
                    cost += (*budget.c0)(i);
                }
            }
            welfare /= n;
            share /= n;
            cost = budget.c1 ? cost / n : 0.0;
            if (budget.active() && cost > budget.kappa + 1e-12) return;

            Eigen::VectorXd params(2 * d);
            for (int k = 0; k < d; ++k) {
                params(k) = signs(k);
                params(d + k) = thresholds(k);
            }
            best.offer(welfare, share, params);
            return;
        }
        for (double t : levels[static_cast<std::size_t>(coord)]) {
            thresholds(coord) = t;
            search(coord + 1);
        }
    };

    const int sign_combos = 1 << d;
    for (int mask = 0; mask < sign_combos; ++mask) {
        for (int k = 0; k < d; ++k) {
            signs(k) = ((mask >> k) & 1) ? -1 : 1;
            auto& lv = levels[static_cast<std::size_t>(k)];
            lv.clear();
            for (int i = 0; i < n; ++i) lv.push_back(signs(k) * v(i, k));
            std::sort(lv.begin(), lv.end());
            lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
            lv.insert(lv.begin(), lv.front() - 1.0);  // exclude-all sentinel
        }
        search(0);
    }

    if (!best.found) return PolicySpec{};
    PolicySpec spec;
    spec.kind = PolicySpec::Kind::Ta;
    spec.signs.resize(d);
    spec.thresholds.resize(d);
    for (int k = 0; k < d; ++k) {
        spec.signs(k) = static_cast<int>(best.params(k));
        spec.thresholds(k) = best.params(d + k);
    }
    spec.pair = pair;
    spec.feature_names = names;
    spec.attained_welfare = best.welfare;
    double cost = 0.0;
    if (budget.c1) {
        for (int i = 0; i < n; ++i) {
            bool inside = true;
            for (int k = 0; k < d && inside; ++k) {
                inside = spec.signs(k) * v(i, k) <= spec.thresholds(k);
            }
            cost += inside ? (*budget.c1)(i) : (*budget.c0)(i);
        }
        cost /= n;
    }
    spec.attained_budget = cost;
    return spec;
}

}  // namespace

// ---------------------------------------------------------------------------

int PolicySpec::assign_features(const Eigen::VectorXd& v) const {
    switch (kind) {
        case Kind::Les: {
            double score = lambda(0);
            for (Eigen::Index j = 0; j < v.size(); ++j) score += lambda(j + 1) * v(j);
            return score >= 0.0 ? 1 : 0;
        }
        case Kind::Ta: {
            for (Eigen::Index k = 0; k < v.size(); ++k) {
                if (signs(k) * v(k) > thresholds(k)) return 0;
            }
            return 1;
        }
        case Kind::Empty:
            throw std::logic_error("the empty policy sentinel cannot assign");
    }
    return 0;
}

int PolicySpec::assign(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    const ColumnSelector sel = ColumnSelector::parse(feature_names);
    return assign_features(sel.row(x, z));
}

AssignFn PolicySpec::assign_fn() const {
    const ColumnSelector sel = ColumnSelector::parse(feature_names);
    PolicySpec copy = *this;
    return [copy, sel](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
        return copy.assign_features(sel.row(x, z));
    };
}

std::string policy_to_json(const PolicySpec& spec) {
    nlohmann::ordered_json j;
    switch (spec.kind) {
        case PolicySpec::Kind::Les: j["class"] = "les"; break;
        case PolicySpec::Kind::Ta: j["class"] = "ta"; break;
        case PolicySpec::Kind::Empty: j["class"] = "empty"; break;
    }
    if (spec.kind == PolicySpec::Kind::Les) {
        j["lambda"] = std::vector<double>(spec.lambda.data(),
                                          spec.lambda.data() + spec.lambda.size());
    }
    if (spec.kind == PolicySpec::Kind::Ta) {
        j["thresholds"] = std::vector<double>(
            spec.thresholds.data(), spec.thresholds.data() + spec.thresholds.size());
        j["signs"] =
            std::vector<int>(spec.signs.data(), spec.signs.data() + spec.signs.size());
    }
    j["features"] = spec.feature_names;
    j["alpha0"] = spec.pair.alpha0.to_string();
    j["alpha1"] = spec.pair.alpha1.to_string();
    j["welfare"] = spec.attained_welfare;
    j["budget"] = spec.attained_budget;
    return j.dump(2);
}

PolicySpec policy_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    PolicySpec spec;
    const std::string cls = j.at("class").get<std::string>();
    if (cls == "les") {
        spec.kind = PolicySpec::Kind::Les;
        const auto lam = j.at("lambda").get<std::vector<double>>();
        spec.lambda =
            Eigen::Map<const Eigen::VectorXd>(lam.data(), static_cast<long>(lam.size()));
    } else if (cls == "ta") {
        spec.kind = PolicySpec::Kind::Ta;
        const auto th = j.at("thresholds").get<std::vector<double>>();
        const auto sg = j.at("signs").get<std::vector<int>>();
        spec.thresholds =
            Eigen::Map<const Eigen::VectorXd>(th.data(), static_cast<long>(th.size()));
        spec.signs = Eigen::Map<const Eigen::VectorXi>(sg.data(), static_cast<long>(sg.size()));
    } else if (cls == "empty") {
        spec.kind = PolicySpec::Kind::Empty;
    } else {
        throw ConfigError("unknown policy class '" + cls + "'");
    }
    if (j.contains("features")) {
        spec.feature_names = j.at("features").get<std::vector<std::string>>();
    }
    if (j.contains("alpha0")) {
        spec.pair.alpha0 = Manipulation::parse(j.at("alpha0").get<std::string>());
        spec.pair.alpha1 = Manipulation::parse(j.at("alpha1").get<std::string>());
    }
    spec.attained_welfare = j.value("welfare", 0.0);
    spec.attained_budget = j.value("budget", 0.0);
    return spec;
}

// ---------------------------------------------------------------------------

PolicySpec solve_fewm(const GainVector& gains, PolicyClass policy_class, Backend backend,
                      const SolveOptions& opts) {
    if (policy_class == PolicyClass::Ta) return solve_ta(gains);
    return solve_les(gains.g, gains.v, gains.v_names, gains.pair, BudgetView{}, backend, opts);
}

PolicySpec solve_bewm(const GainVector& gains, PolicyClass policy_class, double kappa,
                      Backend backend, const SolveOptions& opts) {
    BudgetView budget{&gains.c1, &gains.c0, kappa};
    if (policy_class == PolicyClass::Ta) {
        return solve_ta_impl(gains.g, gains.v, gains.v_names, gains.pair, budget);
    }
    return solve_les(gains.g, gains.v, gains.v_names, gains.pair, budget, backend, opts);
}

PolicySpec solve_dr_ewm(const DrScoreSet& scores, const Eigen::MatrixXd& v,
                        const std::vector<std::string>& feature_names,
                        const ManipulationPair& pair, PolicyClass policy_class, Backend backend,
                        const SolveOptions& opts) {
    if (policy_class == PolicyClass::Ta) {
        return solve_ta_impl(scores.gamma, v, feature_names, pair, BudgetView{});
    }
    return solve_les(scores.gamma, v, feature_names, pair, BudgetView{}, backend, opts);
}

PolicySpec solve_ta(const GainVector& gains) {
    return solve_ta_impl(gains.g, gains.v, gains.v_names, gains.pair, BudgetView{});
}

PolicySpec solve_les_candidates(const Eigen::VectorXd& objective, const Eigen::MatrixXd& v,
                                const std::vector<std::string>& feature_names,
                                const ManipulationPair& pair,
                                const std::vector<Eigen::VectorXd>& thetas,
                                const Eigen::VectorXd* c1, const Eigen::VectorXd* c0,
                                double kappa) {
    const int n = static_cast<int>(objective.size());
    if (n == 0) throw ConfigError("cannot optimize over an empty sample");
    const int d = static_cast<int>(v.cols());
    BudgetView budget{c1, c0, kappa};

    std::vector<Eigen::VectorXd> all = thetas;
    Eigen::VectorXd one = Eigen::VectorXd::Zero(d + 1);
    one(0) = 1.0;
    all.push_back(one);
    all.push_back(-one);

    BestTracker best;

    if (d == 1) {
        // Sorted sweep: labels of any rule 1{l0 + l1 v >= 0} form a prefix or
        // suffix of the v-sorted order, so each candidate costs O(log n).
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return v(a, 0) < v(b, 0); });
        Eigen::VectorXd obj_prefix(n + 1), dc_prefix(n + 1);
        obj_prefix(0) = 0.0;
        dc_prefix(0) = 0.0;
        double c0_total = 0.0;
        for (int i = 0; i < n; ++i) {
            const int row = order[static_cast<std::size_t>(i)];
            obj_prefix(i + 1) = obj_prefix(i) + objective(row);
            const double dc = budget.c1 ? ((*c1)(row) - (*c0)(row)) : 0.0;
            dc_prefix(i + 1) = dc_prefix(i) + dc;
            if (budget.c0) c0_total += (*c0)(row);
        }

        for (const auto& raw : all) {
            const Eigen::VectorXd theta = normalize_sup(raw);
            const double l0 = theta(0), l1 = theta(1);
            int from = 0, to = n;  // labeled block in sorted order
            if (l1 > 0.0) {
                // score increasing in v: labeled rows are a suffix.
                from = static_cast<int>(std::partition_point(
                                            order.begin(), order.end(),
                                            [&](int row) { return l0 + l1 * v(row, 0) < 0.0; }) -
                                        order.begin());
            } else if (l1 < 0.0) {
                to = static_cast<int>(std::partition_point(
                                          order.begin(), order.end(),
                                          [&](int row) { return l0 + l1 * v(row, 0) >= 0.0; }) -
                                      order.begin());
                from = 0;
            } else {
                if (l0 >= 0.0) {
                    from = 0;
                    to = n;
                } else {
                    from = 0;
                    to = 0;
                }
            }
            const double welfare = (obj_prefix(to) - obj_prefix(from)) / n;
            const double share = static_cast<double>(to - from) / n;
            if (budget.active()) {
                const double cost = (c0_total + dc_prefix(to) - dc_prefix(from)) / n;
                if (cost > budget.kappa + 1e-12) continue;
            }
            best.offer(welfare, share, theta);
        }
    } else {
        for (const auto& raw : all) {
            const Eigen::VectorXd theta = normalize_sup(raw);
            const LesEval ev = evaluate_les(theta, objective, v, budget);
            if (!ev.feasible) continue;
            best.offer(ev.welfare, ev.share, theta);
        }
    }

    if (!best.found) return PolicySpec{};
    return make_les_spec(best.params, objective, v, budget, feature_names, pair);
}

}  // namespace ewmiv
