#include "ewmiv/structural.hpp"

#include <cmath>
#include <stdexcept>

#include "ewmiv/errors.hpp"

namespace ewmiv {

double Polynomial::operator()(double u) const {
    double acc = 0.0;
    for (std::size_t j = coefs_.size(); j-- > 0;) acc = acc * u + coefs_[j];
    return acc;
}

Polynomial Polynomial::derivative() const {
    if (coefs_.size() <= 1) return Polynomial{};
    std::vector<double> d(coefs_.size() - 1);
    for (std::size_t j = 1; j < coefs_.size(); ++j) {
        d[j - 1] = static_cast<double>(j) * coefs_[j];
    }
    return Polynomial(std::move(d));
}

Polynomial Polynomial::antiderivative() const {
    std::vector<double> a(coefs_.size() + 1, 0.0);
    for (std::size_t j = 0; j < coefs_.size(); ++j) {
        a[j + 1] = coefs_[j] / static_cast<double>(j + 1);
    }
    return Polynomial(std::move(a));
}

Polynomial Polynomial::operator-(const Polynomial& other) const {
    std::vector<double> c(std::max(coefs_.size(), other.coefs_.size()), 0.0);
    for (std::size_t j = 0; j < coefs_.size(); ++j) c[j] += coefs_[j];
    for (std::size_t j = 0; j < other.coefs_.size(); ++j) c[j] -= other.coefs_[j];
    return Polynomial(std::move(c));
}

double Polynomial::max_abs_on_unit() const {
    double m = 0.0;
    for (int i = 0; i <= 512; ++i) {
        m = std::max(m, std::abs((*this)(static_cast<double>(i) / 512.0)));
    }
    return m;
}

double Manipulation::apply(double z1) const {
    switch (kind) {
        case Kind::Identity: return z1;
        case Kind::CapSubsidy: return (z1 >= param) ? z1 - param : 0.0;
        case Kind::Shift: return z1 + param;
        case Kind::SetTo: return param;
    }
    return z1;
}

Manipulation Manipulation::parse(const std::string& spec) {
    Manipulation m;
    if (spec == "identity") return m;
    const std::size_t open = spec.find('(');
    const std::size_t close = spec.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ConfigError("bad manipulation spec '" + spec + "'");
    }
    const std::string name = spec.substr(0, open);
    const double arg = std::stod(spec.substr(open + 1, close - open - 1));
    if (name == "cap_subsidy") {
        if (arg < 0) throw ConfigError("cap_subsidy amount must be nonnegative");
        m.kind = Kind::CapSubsidy;
    } else if (name == "shift") {
        m.kind = Kind::Shift;
    } else if (name == "set_to") {
        m.kind = Kind::SetTo;
    } else {
        throw ConfigError("unknown manipulation '" + name + "'");
    }
    m.param = arg;
    return m;
}

std::string Manipulation::to_string() const {
    switch (kind) {
        case Kind::Identity: return "identity";
        case Kind::CapSubsidy: return "cap_subsidy(" + format_num(param) + ")";
        case Kind::Shift: return "shift(" + format_num(param) + ")";
        case Kind::SetTo: return "set_to(" + format_num(param) + ")";
    }
    return "identity";
}

Eigen::VectorXd ManipulationPair::manipulate(int arm, const Eigen::VectorXd& z) const {
    Eigen::VectorXd out = z;
    out(0) = apply(arm, z(0));
    return out;
}

double SelectionIndex::value(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    const Eigen::VectorXd phi = features.row(x, z);
    if (phi.size() != gamma.size()) {
        throw ConfigError("selection index: feature map size " + std::to_string(phi.size()) +
                          " != coefficient size " + std::to_string(gamma.size()));
    }
    const double idx = gamma.dot(phi);
    switch (link) {
        case Link::Logistic: return 1.0 / (1.0 + std::exp(-idx));
        case Link::LinearClamp: return std::min(1.0, std::max(0.0, idx));
    }
    return 0.0;
}

double OutcomeModel::mean(int d, const Eigen::VectorXd& x, double u) const {
    const Eigen::VectorXd& beta = d ? beta1 : beta0;
    if (beta.size() != x.size()) {
        throw ConfigError("outcome model: beta size " + std::to_string(beta.size()) +
                          " != covariate size " + std::to_string(x.size()));
    }
    return beta.dot(x) + (d ? q1(u) : q0(u));
}

double OutcomeModel::mte(double u, const Eigen::VectorXd& x) const {
    return mean(1, x, u) - mean(0, x, u);
}

double StructuralDgp::propensity(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    return selection.value(x, z);
}

double StructuralDgp::mte_bound() const {
    double linear = 0.0;
    for (int j = 0; j < d_x(); ++j) {
        const auto [lo, hi] = covariate_law[static_cast<std::size_t>(j)].support();
        const double delta = outcome.beta1(j) - outcome.beta0(j);
        linear += std::abs(delta) * std::max(std::abs(lo), std::abs(hi));
    }
    return linear + outcome.mte_u_part().max_abs_on_unit();
}

void StructuralDgp::validate() const {
    if (covariate_law.empty()) throw ConfigError("dgp needs at least one covariate");
    if (instrument_law.empty()) throw ConfigError("dgp needs at least one instrument");
    if (outcome.beta0.size() != d_x() || outcome.beta1.size() != d_x()) {
        throw ConfigError("dgp outcome coefficients must match the covariate count");
    }
    if (selection.gamma.size() != selection.features.size()) {
        throw ConfigError("dgp selection coefficients must match its feature map");
    }
    if (noise_scale < 0) throw ConfigError("noise_scale must be nonnegative");
    if (!std::isfinite(mte_bound())) throw ConfigError("dgp MTE is unbounded");
}

StructuralDgp StructuralDgp::from_config(const TextConfig& cfg, const std::string& prefix) {
    StructuralDgp dgp;
    for (const auto& spec : cfg.str_list(prefix, "covariates")) {
        dgp.covariate_law.push_back(MarginalDist::parse(spec));
    }
    for (const auto& spec : cfg.str_list(prefix, "instruments")) {
        dgp.instrument_law.push_back(MarginalDist::parse(spec));
    }

    const std::string sel = prefix + ".selection";
    const std::string link = cfg.str_or(sel, "link", "logistic");
    if (link == "logistic") {
        dgp.selection.link = SelectionIndex::Link::Logistic;
    } else if (link == "linear_clamp") {
        dgp.selection.link = SelectionIndex::Link::LinearClamp;
    } else {
        throw ConfigError("unknown selection link '" + link + "'");
    }
    dgp.selection.features = FeatureMap::parse(cfg.str_list(sel, "features"));
    const auto gamma = cfg.num_list(sel, "coefficients");
    dgp.selection.gamma = Eigen::Map<const Eigen::VectorXd>(gamma.data(),
                                                            static_cast<long>(gamma.size()));

    const std::string out = prefix + ".outcome";
    const auto b0 = cfg.num_list(out, "beta0");
    const auto b1 = cfg.num_list(out, "beta1");
    dgp.outcome.beta0 = Eigen::Map<const Eigen::VectorXd>(b0.data(), static_cast<long>(b0.size()));
    dgp.outcome.beta1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), static_cast<long>(b1.size()));
    if (cfg.has(out, "q0")) dgp.outcome.q0 = Polynomial(cfg.num_list(out, "q0"));
    if (cfg.has(out, "q1")) dgp.outcome.q1 = Polynomial(cfg.num_list(out, "q1"));
    dgp.noise_scale = cfg.num_or(out, "noise_scale", 0.0);

    dgp.validate();
    return dgp;
}

void StructuralDgp::to_config(TextConfig& cfg, const std::string& prefix) const {
    std::string covs, insts;
    for (std::size_t j = 0; j < covariate_law.size(); ++j) {
        if (j) covs += ", ";
        covs += covariate_law[j].to_string();
    }
    for (std::size_t j = 0; j < instrument_law.size(); ++j) {
        if (j) insts += ", ";
        insts += instrument_law[j].to_string();
    }
    cfg.set(prefix, "covariates", covs);
    cfg.set(prefix, "instruments", insts);

    const std::string sel = prefix + ".selection";
    cfg.set(sel, "link",
            selection.link == SelectionIndex::Link::Logistic ? "logistic" : "linear_clamp");
    std::string feats;
    const auto names = selection.features.term_names();
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (j) feats += ", ";
        feats += names[j];
    }
    cfg.set(sel, "features", feats);
    cfg.set_num_list(sel, "coefficients",
                     std::vector<double>(selection.gamma.data(),
                                         selection.gamma.data() + selection.gamma.size()));

    const std::string out = prefix + ".outcome";
    cfg.set_num_list(out, "beta0",
                     std::vector<double>(outcome.beta0.data(),
                                         outcome.beta0.data() + outcome.beta0.size()));
    cfg.set_num_list(out, "beta1",
                     std::vector<double>(outcome.beta1.data(),
                                         outcome.beta1.data() + outcome.beta1.size()));
    cfg.set_num_list(out, "q0", outcome.q0.coefs());
    cfg.set_num_list(out, "q1", outcome.q1.coefs());
    cfg.set_num(out, "noise_scale", noise_scale);
}

Sample sample_dgp(const StructuralDgp& dgp, int n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample size must be at least 1");
    dgp.validate();

    Rng rng(seed);
    Sample s;
    s.y.resize(n);
    s.d.resize(n);
    s.x.resize(n, dgp.d_x());
    s.z.resize(n, dgp.d_z());
    s.latent_u = Eigen::VectorXd(n);

    Eigen::VectorXd x(dgp.d_x()), z(dgp.d_z());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dgp.d_x(); ++j) {
            x(j) = dgp.covariate_law[static_cast<std::size_t>(j)].sample(rng);
        }
        for (int j = 0; j < dgp.d_z(); ++j) {
            z(j) = dgp.instrument_law[static_cast<std::size_t>(j)].sample(rng);
        }
        const double u = rng.uniform01();
        const int d = (dgp.propensity(x, z) >= u) ? 1 : 0;
        const double noise = (dgp.noise_scale > 0) ? rng.normal(0.0, dgp.noise_scale) : 0.0;
        s.x.row(i) = x.transpose();
        s.z.row(i) = z.transpose();
        s.d(i) = d;
        (*s.latent_u)(i) = u;
        s.y(i) = dgp.outcome.mean(d, x, u) + noise;
    }
    return s;
}

double oracle_mte(const StructuralDgp& dgp, double u, const Eigen::VectorXd& x) {
    if (u < 0.0 || u > 1.0) {
        throw std::domain_error("oracle_mte: u = " + std::to_string(u) + " outside [0,1]");
    }
    return dgp.outcome.mte(u, x);
}

double conditional_outcome_given_p(const StructuralDgp& dgp, const Eigen::VectorXd& x,
                                   double p) {
    const Polynomial iq0 = dgp.outcome.q0.antiderivative();
    const Polynomial iq1 = dgp.outcome.q1.antiderivative();
    return p * dgp.outcome.beta1.dot(x) + (1.0 - p) * dgp.outcome.beta0.dot(x) + iq1(p) +
           (iq0(1.0) - iq0(p));
}

double oracle_mte_integral(const StructuralDgp& dgp, const Eigen::VectorXd& x, double lo,
                           double hi) {
    const double linear = dgp.outcome.beta1.dot(x) - dgp.outcome.beta0.dot(x);
    const Polynomial anti = dgp.outcome.mte_u_part().antiderivative();
    return (hi - lo) * linear + anti(hi) - anti(lo);
}

namespace {

MonteCarloValue summarize(double sum, double sumsq, int draws) {
    MonteCarloValue mc;
    mc.value = sum / draws;
    const double var = std::max(0.0, sumsq / draws - mc.value * mc.value);
    mc.se = std::sqrt(var / draws);
    return mc;
}

}  // namespace

MonteCarloValue oracle_welfare(const StructuralDgp& dgp, const ManipulationPair& pair,
                               const AssignFn& assign, WelfareMethod method, int draws,
                               std::uint64_t seed) {
    if (draws < 1) throw ConfigError("oracle_welfare needs at least one draw");
    dgp.validate();

    Rng rng(seed, 1);
    Eigen::VectorXd x(dgp.d_x()), z(dgp.d_z());
    double sum = 0.0, sumsq = 0.0;

    for (int i = 0; i < draws; ++i) {
        for (int j = 0; j < dgp.d_x(); ++j) {
            x(j) = dgp.covariate_law[static_cast<std::size_t>(j)].sample(rng);
        }
        for (int j = 0; j < dgp.d_z(); ++j) {
            z(j) = dgp.instrument_law[static_cast<std::size_t>(j)].sample(rng);
        }
        const int arm = assign(x, z) ? 1 : 0;
        const Eigen::VectorXd z_new = pair.manipulate(arm, z);

        double value;
        if (method == WelfareMethod::Formula) {
            const double p_status_quo = dgp.propensity(x, z);
            const double p_manip = dgp.propensity(x, z_new);
            value = conditional_outcome_given_p(dgp, x, p_status_quo) +
                    oracle_mte_integral(dgp, x, p_status_quo, p_manip);
        } else {
            const double u = rng.uniform01();
            const int d = (dgp.propensity(x, z_new) >= u) ? 1 : 0;
            const double noise = (dgp.noise_scale > 0) ? rng.normal(0.0, dgp.noise_scale) : 0.0;
            value = dgp.outcome.mean(d, x, u) + noise;
        }
        sum += value;
        sumsq += value * value;
    }
    return summarize(sum, sumsq, draws);
}

MonteCarloValue oracle_budget(const StructuralDgp& dgp, const ManipulationPair& pair,
                              const AssignFn& assign, const ArmCostFn& cost, int draws,
                              std::uint64_t seed) {
    if (draws < 1) throw ConfigError("oracle_budget needs at least one draw");
    dgp.validate();

    Rng rng(seed, 2);
    Eigen::VectorXd x(dgp.d_x()), z(dgp.d_z());
    double sum = 0.0, sumsq = 0.0;

    for (int i = 0; i < draws; ++i) {
        for (int j = 0; j < dgp.d_x(); ++j) {
            x(j) = dgp.covariate_law[static_cast<std::size_t>(j)].sample(rng);
        }
        for (int j = 0; j < dgp.d_z(); ++j) {
            z(j) = dgp.instrument_law[static_cast<std::size_t>(j)].sample(rng);
        }
        const int arm = assign(x, z) ? 1 : 0;
        const double z1_new = pair.apply(arm, z(0));
        const double c = cost(x, z, z1_new);
        if (c < 0) throw ConfigError("cost function returned a negative value");
        const Eigen::VectorXd z_new = pair.manipulate(arm, z);
        const double value = c * dgp.propensity(x, z_new);
        sum += value;
        sumsq += value * value;
    }
    return summarize(sum, sumsq, draws);
}

double oracle_density_ratio(const StructuralDgp& dgp, const ManipulationPair& pair,
                            const Eigen::VectorXd& /*x*/, const Eigen::VectorXd& z) {
    if (pair.alpha1 == pair.alpha0) return 0.0;
    if (!pair.alpha0.preserves_continuity() || !pair.alpha1.preserves_continuity()) {
        throw ConfigError(
            "oracle density ratio undefined: manipulation pushforward has atoms "
            "(use identity/shift manipulations)");
    }
    const MarginalDist& law = dgp.instrument_law.front();
    if (law.is_discrete()) {
        throw ConfigError("oracle density ratio requires a continuous z1 law");
    }
    const double base = law.pdf(z(0));
    if (base <= 0) {
        throw ConfigError("oracle density ratio evaluated outside the z1 support");
    }
    // Pushforward of shift(c) has density f(t - c); identity keeps f.
    auto pushforward = [&](const Manipulation& m, double t) {
        if (m.kind == Manipulation::Kind::Identity) return law.pdf(t);
        return law.pdf(t - m.param);
    };
    return (pushforward(pair.alpha1, z(0)) - pushforward(pair.alpha0, z(0))) / base;
}

}  // namespace ewmiv
