#include "ewmiv/distributions.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "ewmiv/errors.hpp"
#include "ewmiv/text_config.hpp"

namespace ewmiv {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double to_num(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw ConfigError("bad number '" + s + "' in distribution spec " + where);
    }
    return v;
}

}  // namespace

MarginalDist MarginalDist::constant(double v) {
    MarginalDist d;
    d.kind_ = Kind::Constant;
    d.a_ = v;
    d.atoms_ = {{v, 1.0}};
    return d;
}

MarginalDist MarginalDist::uniform(double a, double b) {
    if (!(a < b)) throw ConfigError("uniform(a,b) requires a < b");
    MarginalDist d;
    d.kind_ = Kind::Uniform;
    d.a_ = a;
    d.b_ = b;
    return d;
}

MarginalDist MarginalDist::normal(double mean, double sd) {
    if (!(sd > 0)) throw ConfigError("normal(mean,sd) requires sd > 0");
    MarginalDist d;
    d.kind_ = Kind::Normal;
    d.a_ = mean;
    d.b_ = sd;
    return d;
}

MarginalDist MarginalDist::bernoulli(double p) {
    if (p < 0 || p > 1) throw ConfigError("bernoulli(p) requires p in [0,1]");
    MarginalDist d;
    d.kind_ = Kind::Bernoulli;
    d.a_ = p;
    d.atoms_ = {{0.0, 1.0 - p}, {1.0, p}};
    return d;
}

MarginalDist MarginalDist::discrete(std::vector<double> values, std::vector<double> probs) {
    if (values.empty() || values.size() != probs.size()) {
        throw ConfigError("discrete law needs matching nonempty value/probability lists");
    }
    double total = 0;
    for (double p : probs) {
        if (p < 0) throw ConfigError("discrete law probabilities must be nonnegative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("discrete law probabilities must sum to 1");
    }
    MarginalDist d;
    d.kind_ = Kind::Discrete;
    for (std::size_t i = 0; i < values.size(); ++i) d.atoms_.emplace_back(values[i], probs[i]);
    return d;
}

MarginalDist MarginalDist::laplace(double mu, double b) {
    if (!(b > 0)) throw ConfigError("laplace(mu,b) requires b > 0");
    MarginalDist d;
    d.kind_ = Kind::Laplace;
    d.a_ = mu;
    d.b_ = b;
    return d;
}

MarginalDist MarginalDist::logistic(double mu, double s) {
    if (!(s > 0)) throw ConfigError("logistic(mu,s) requires s > 0");
    MarginalDist d;
    d.kind_ = Kind::Logistic;
    d.a_ = mu;
    d.b_ = s;
    return d;
}

MarginalDist MarginalDist::parse(const std::string& spec) {
    const std::size_t open = spec.find('(');
    const std::size_t close = spec.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ConfigError("bad distribution spec '" + spec + "'");
    }
    std::string name = spec.substr(0, open);
    name.erase(0, name.find_first_not_of(" \t"));
    name.erase(name.find_last_not_of(" \t") + 1);
    const std::string args = spec.substr(open + 1, close - open - 1);
    const auto parts = split(args, ',');

    if (name == "constant") return constant(to_num(parts.at(0), spec));
    if (name == "uniform") return uniform(to_num(parts.at(0), spec), to_num(parts.at(1), spec));
    if (name == "normal") return normal(to_num(parts.at(0), spec), to_num(parts.at(1), spec));
    if (name == "bernoulli") return bernoulli(to_num(parts.at(0), spec));
    if (name == "laplace") return laplace(to_num(parts.at(0), spec), to_num(parts.at(1), spec));
    if (name == "logistic") return logistic(to_num(parts.at(0), spec), to_num(parts.at(1), spec));
    if (name == "discrete") {
        std::vector<double> values, probs;
        for (const auto& item : parts) {
            const auto vp = split(item, ':');
            if (vp.size() != 2) throw ConfigError("discrete entries look like value:prob");
            values.push_back(to_num(vp[0], spec));
            probs.push_back(to_num(vp[1], spec));
        }
        return discrete(values, probs);
    }
    throw ConfigError("unknown distribution kind '" + name + "'");
}

std::string MarginalDist::to_string() const {
    std::ostringstream out;
    switch (kind_) {
        case Kind::Constant: out << "constant(" << format_num(a_) << ")"; break;
        case Kind::Uniform:
            out << "uniform(" << format_num(a_) << ", " << format_num(b_) << ")";
            break;
        case Kind::Normal:
            out << "normal(" << format_num(a_) << ", " << format_num(b_) << ")";
            break;
        case Kind::Bernoulli: out << "bernoulli(" << format_num(a_) << ")"; break;
        case Kind::Laplace:
            out << "laplace(" << format_num(a_) << ", " << format_num(b_) << ")";
            break;
        case Kind::Logistic:
            out << "logistic(" << format_num(a_) << ", " << format_num(b_) << ")";
            break;
        case Kind::Discrete: {
            out << "discrete(";
            for (std::size_t i = 0; i < atoms_.size(); ++i) {
                if (i) out << ", ";
                out << format_num(atoms_[i].first) << ":" << format_num(atoms_[i].second);
            }
            out << ")";
            break;
        }
    }
    return out.str();
}

bool MarginalDist::is_discrete() const {
    return kind_ == Kind::Constant || kind_ == Kind::Bernoulli || kind_ == Kind::Discrete;
}

double MarginalDist::sample(Rng& rng) const {
    switch (kind_) {
        case Kind::Constant: return a_;
        case Kind::Uniform: return rng.uniform(a_, b_);
        case Kind::Normal: return rng.normal(a_, b_);
        case Kind::Bernoulli: return rng.bernoulli(a_) ? 1.0 : 0.0;
        case Kind::Laplace: {
            const double u = rng.uniform01() - 0.5;
            return a_ - b_ * std::copysign(std::log(1.0 - 2.0 * std::abs(u)), u);
        }
        case Kind::Logistic: {
            double u = rng.uniform01();
            if (u < 1e-15) u = 1e-15;
            if (u > 1 - 1e-15) u = 1 - 1e-15;
            return a_ + b_ * std::log(u / (1.0 - u));
        }
        case Kind::Discrete: {
            const double u = rng.uniform01();
            double acc = 0;
            for (const auto& [v, p] : atoms_) {
                acc += p;
                if (u < acc) return v;
            }
            return atoms_.back().first;
        }
    }
    return 0.0;
}

double MarginalDist::pdf(double t) const {
    switch (kind_) {
        case Kind::Uniform: return (t >= a_ && t <= b_) ? 1.0 / (b_ - a_) : 0.0;
        case Kind::Normal: {
            const double z = (t - a_) / b_;
            return std::exp(-0.5 * z * z) / (b_ * std::sqrt(2.0 * M_PI));
        }
        case Kind::Laplace: return std::exp(-std::abs(t - a_) / b_) / (2.0 * b_);
        case Kind::Logistic: {
            const double e = std::exp(-(t - a_) / b_);
            return e / (b_ * (1.0 + e) * (1.0 + e));
        }
        default:
            throw ConfigError("pdf requested for a discrete law (" + to_string() + ")");
    }
}

const std::vector<std::pair<double, double>>& MarginalDist::atoms() const {
    if (!is_discrete()) {
        throw ConfigError("atoms requested for a continuous law (" + to_string() + ")");
    }
    return atoms_;
}

double MarginalDist::mean() const {
    switch (kind_) {
        case Kind::Constant: return a_;
        case Kind::Uniform: return 0.5 * (a_ + b_);
        case Kind::Normal:
        case Kind::Laplace:
        case Kind::Logistic: return a_;
        case Kind::Bernoulli: return a_;
        case Kind::Discrete: {
            double m = 0;
            for (const auto& [v, p] : atoms_) m += v * p;
            return m;
        }
    }
    return 0.0;
}

std::pair<double, double> MarginalDist::support() const {
    switch (kind_) {
        case Kind::Constant: return {a_, a_};
        case Kind::Uniform: return {a_, b_};
        case Kind::Normal: return {a_ - 8.0 * b_, a_ + 8.0 * b_};
        case Kind::Laplace: return {a_ - 40.0 * b_, a_ + 40.0 * b_};
        case Kind::Logistic: return {a_ - 40.0 * b_, a_ + 40.0 * b_};
        case Kind::Bernoulli: return {0.0, 1.0};
        case Kind::Discrete: {
            double lo = atoms_.front().first, hi = atoms_.front().first;
            for (const auto& [v, p] : atoms_) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            return {lo, hi};
        }
    }
    return {0.0, 0.0};
}

}  // namespace ewmiv
