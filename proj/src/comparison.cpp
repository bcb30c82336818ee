#include "vicert/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vicert/errors.hpp"

namespace vicert {

struct MonotoneFn::Node {
    FnKind kind = FnKind::Identity;
    double a = 0.0; // gain / coeff / factor
    double b = 0.0; // exponent
    std::vector<MonotoneFn> children;
    std::vector<std::pair<double, double>> breakpoints;
    std::optional<double> domain_cap;
};

MonotoneFn::MonotoneFn(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

namespace {

std::shared_ptr<MonotoneFn::Node> make_node(FnKind kind) {
    auto n = std::make_shared<MonotoneFn::Node>();
    n->kind = kind;
    return n;
}

void require_finite_positive(double v, const char* what) {
    if (!(std::isfinite(v) && v > 0.0))
        throw DomainError(std::string(what) + " must be finite and positive");
}

} // namespace

MonotoneFn MonotoneFn::linear(double gain) {
    require_finite_positive(gain, "linear gain");
    auto n = make_node(FnKind::Linear);
    n->a = gain;
    return MonotoneFn(n);
}

MonotoneFn MonotoneFn::power(double coeff, double exponent) {
    require_finite_positive(coeff, "power coeff");
    require_finite_positive(exponent, "power exponent");
    auto n = make_node(FnKind::Power);
    n->a = coeff;
    n->b = exponent;
    return MonotoneFn(n);
}

MonotoneFn MonotoneFn::identity() {
    return MonotoneFn(make_node(FnKind::Identity));
}

MonotoneFn MonotoneFn::compose(MonotoneFn outer, MonotoneFn inner) {
    auto n = make_node(FnKind::Compose);
    n->children = {std::move(outer), std::move(inner)};
    return MonotoneFn(n);
}

MonotoneFn MonotoneFn::scale(double factor, MonotoneFn inner) {
    require_finite_positive(factor, "scale factor");
    auto n = make_node(FnKind::Scale);
    n->a = factor;
    n->children = {std::move(inner)};
    return MonotoneFn(n);
}

namespace {
std::shared_ptr<MonotoneFn::Node> make_nary(FnKind kind, std::vector<MonotoneFn> terms, const char* what) {
    if (terms.empty())
        throw DomainError(std::string(what) + " needs at least one term");
    auto n = make_node(kind);
    n->children = std::move(terms);
    return n;
}
} // namespace

MonotoneFn MonotoneFn::sum(std::vector<MonotoneFn> terms) {
    return MonotoneFn(make_nary(FnKind::Sum, std::move(terms), "sum"));
}

MonotoneFn MonotoneFn::min_of(std::vector<MonotoneFn> terms) {
    return MonotoneFn(make_nary(FnKind::Min, std::move(terms), "min"));
}

MonotoneFn MonotoneFn::max_of(std::vector<MonotoneFn> terms) {
    return MonotoneFn(make_nary(FnKind::Max, std::move(terms), "max"));
}

MonotoneFn MonotoneFn::shifted_identity_minus(MonotoneFn inner) {
    auto n = make_node(FnKind::ShiftedIdentityMinus);
    n->children = {std::move(inner)};
    MonotoneFn fn{std::shared_ptr<const Node>(n)};
    // The difference s - inner(s) is only usable when it is itself a
    // comparison function; sample it before handing the tree out.
    double hi = n->children[0].domain_cap().value_or(1e6);
    if (auto bad = first_nonincreasing_sample(fn, hi))
        throw DomainError("identity minus inner is not increasing near s=" + std::to_string(*bad));
    return fn;
}

MonotoneFn MonotoneFn::piecewise_linear(std::vector<std::pair<double, double>> breakpoints) {
    if (breakpoints.size() < 2)
        throw DomainError("piecewise_linear needs at least two breakpoints");
    if (breakpoints.front().first != 0.0 || breakpoints.front().second != 0.0)
        throw DomainError("piecewise_linear must start at (0, 0)");
    for (size_t i = 1; i < breakpoints.size(); ++i) {
        if (!(breakpoints[i].first > breakpoints[i - 1].first) ||
            !(breakpoints[i].second > breakpoints[i - 1].second))
            throw DomainError("piecewise_linear breakpoints must increase in both coordinates");
        if (!std::isfinite(breakpoints[i].first) || !std::isfinite(breakpoints[i].second))
            throw DomainError("piecewise_linear breakpoints must be finite");
    }
    auto n = make_node(FnKind::PiecewiseLinear);
    n->breakpoints = std::move(breakpoints);
    return MonotoneFn(n);
}

MonotoneFn MonotoneFn::inverse(MonotoneFn inner) {
    auto n = make_node(FnKind::Inverse);
    n->children = {std::move(inner)};
    return MonotoneFn(n);
}

FnKind MonotoneFn::kind() const { return node_->kind; }

const std::vector<MonotoneFn>& MonotoneFn::children() const { return node_->children; }
double MonotoneFn::param_a() const { return node_->a; }
double MonotoneFn::param_b() const { return node_->b; }
const std::vector<std::pair<double, double>>& MonotoneFn::breakpoints() const {
    return node_->breakpoints;
}

MonotoneFn MonotoneFn::with_domain_cap(double hi) const {
    require_finite_positive(hi, "domain cap");
    auto n = std::make_shared<Node>(*node_);
    n->domain_cap = hi;
    return MonotoneFn(n);
}

std::optional<double> MonotoneFn::domain_cap() const { return node_->domain_cap; }

namespace {

double eval_piecewise(const std::vector<std::pair<double, double>>& pts, double s) {
    // Last segment's slope extends past the final breakpoint so the function
    // stays unbounded.
    if (s >= pts.back().first) {
        const auto& [s1, y1] = pts[pts.size() - 2];
        const auto& [s2, y2] = pts.back();
        return y2 + (s - s2) * (y2 - y1) / (s2 - s1);
    }
    auto it = std::upper_bound(pts.begin(), pts.end(), s,
                               [](double v, const auto& p) { return v < p.first; });
    const auto& [s2, y2] = *it;
    const auto& [s1, y1] = *(it - 1);
    double t = (s - s1) / (s2 - s1);
    return y1 + t * (y2 - y1);
}

} // namespace

double MonotoneFn::evaluate(double s) const {
    if (std::isnan(s) || s < 0.0)
        throw DomainError("comparison functions are defined for s >= 0");
    const Node& n = *node_;
    switch (n.kind) {
    case FnKind::Linear:
        return n.a * s;
    case FnKind::Power:
        return n.a * std::pow(s, n.b);
    case FnKind::Identity:
        return s;
    case FnKind::Compose:
        return n.children[0].evaluate(n.children[1].evaluate(s));
    case FnKind::Scale:
        return n.a * n.children[0].evaluate(s);
    case FnKind::Sum: {
        double acc = 0.0;
        for (const auto& t : n.children) acc += t.evaluate(s);
        return acc;
    }
    case FnKind::Min: {
        double acc = n.children[0].evaluate(s);
        for (size_t i = 1; i < n.children.size(); ++i)
            acc = std::min(acc, n.children[i].evaluate(s));
        return acc;
    }
    case FnKind::Max: {
        double acc = n.children[0].evaluate(s);
        for (size_t i = 1; i < n.children.size(); ++i)
            acc = std::max(acc, n.children[i].evaluate(s));
        return acc;
    }
    case FnKind::ShiftedIdentityMinus:
        return s - n.children[0].evaluate(s);
    case FnKind::PiecewiseLinear:
        return eval_piecewise(n.breakpoints, s);
    case FnKind::Inverse:
        return inverse_evaluate(n.children[0], s);
    }
    throw NumericError("corrupt MonotoneFn node");
}

std::optional<double> MonotoneFn::linear_gain() const {
    const Node& n = *node_;
    switch (n.kind) {
    case FnKind::Linear:
        return n.a;
    case FnKind::Identity:
        return 1.0;
    case FnKind::Power:
        if (n.b == 1.0) return n.a;
        return std::nullopt;
    case FnKind::Scale:
        if (auto g = n.children[0].linear_gain()) return n.a * *g;
        return std::nullopt;
    case FnKind::Compose: {
        auto go = n.children[0].linear_gain();
        auto gi = n.children[1].linear_gain();
        if (go && gi) return *go * *gi;
        return std::nullopt;
    }
    case FnKind::Sum: {
        double acc = 0.0;
        for (const auto& t : n.children) {
            auto g = t.linear_gain();
            if (!g) return std::nullopt;
            acc += *g;
        }
        return acc;
    }
    case FnKind::Min:
    case FnKind::Max: {
        double acc = 0.0;
        bool first = true;
        for (const auto& t : n.children) {
            auto g = t.linear_gain();
            if (!g) return std::nullopt;
            acc = first ? *g : (n.kind == FnKind::Min ? std::min(acc, *g) : std::max(acc, *g));
            first = false;
        }
        return acc;
    }
    case FnKind::ShiftedIdentityMinus:
        if (auto g = n.children[0].linear_gain(); g && *g < 1.0) return 1.0 - *g;
        return std::nullopt;
    case FnKind::Inverse:
        if (auto g = n.children[0].linear_gain()) return 1.0 / *g;
        return std::nullopt;
    case FnKind::PiecewiseLinear:
        return std::nullopt;
    }
    return std::nullopt;
}

namespace {

double invert_piecewise(const std::vector<std::pair<double, double>>& pts, double y) {
    if (y >= pts.back().second) {
        const auto& [s1, y1] = pts[pts.size() - 2];
        const auto& [s2, y2] = pts.back();
        return s2 + (y - y2) * (s2 - s1) / (y2 - y1);
    }
    auto it = std::upper_bound(pts.begin(), pts.end(), y,
                               [](double v, const auto& p) { return v < p.second; });
    const auto& [s2, y2] = *it;
    const auto& [s1, y1] = *(it - 1);
    double t = (y - y1) / (y2 - y1);
    return s1 + t * (s2 - s1);
}

} // namespace

double inverse_evaluate(const MonotoneFn& f, double y, double rel_tol) {
    if (std::isnan(y))
        throw DomainError("inverse_evaluate: target is NaN");
    if (y < 0.0)
        throw RangeError("inverse_evaluate: comparison functions never reach negative values");
    if (!(rel_tol > 0.0))
        throw DomainError("inverse_evaluate: rel_tol must be positive");
    if (y == 0.0)
        return 0.0;

    switch (f.kind()) {
    case FnKind::Linear:
        return y / f.param_a();
    case FnKind::Power:
        return std::pow(y / f.param_a(), 1.0 / f.param_b());
    case FnKind::Identity:
        return y;
    case FnKind::PiecewiseLinear:
        return invert_piecewise(f.breakpoints(), y);
    case FnKind::Inverse:
        // inverse of an inverse is the inner function itself
        return f.children()[0].evaluate(y);
    default:
        break;
    }

    // Bracket [lo, hi] with f(lo) < y <= f(hi), growing hi geometrically.
    double lo = 0.0;
    double hi = 1.0;
    const auto cap = f.domain_cap();
    if (cap) hi = std::min(hi, *cap);
    int growth = 0;
    while (f.evaluate(hi) < y) {
        if (cap && hi >= *cap)
            throw RangeError("inverse_evaluate: target above f(domain cap)");
        lo = hi;
        hi *= 2.0;
        if (cap) hi = std::min(hi, *cap);
        if (++growth > 1100 || !std::isfinite(hi))
            throw RangeError("inverse_evaluate: target not attained on [0, inf)");
    }

    double mid = hi;
    for (int it = 0; it < 500; ++it) {
        mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break; // bracket at ulp resolution, cannot refine further
        double fm = f.evaluate(mid);
        if (fm < y)
            lo = mid;
        else
            hi = mid;
        if (std::abs(fm - y) <= rel_tol * std::max(1.0, y) &&
            (hi - lo) <= rel_tol * std::max(1.0, mid))
            break;
    }
    return mid;
}

double iterate(const MonotoneFn& f, int k, double s) {
    if (k < 0)
        throw DomainError("iterate: negative iteration count");
    double v = s;
    for (int i = 0; i < k; ++i)
        v = f.evaluate(v);
    return v;
}

std::optional<double> first_nonincreasing_sample(const MonotoneFn& f, double hi, int points) {
    if (!(hi > 0.0) || points < 2)
        throw DomainError("first_nonincreasing_sample: bad sampling range");
    double prev_s = 0.0;
    double prev_v = f.evaluate(0.0);
    const double lo = hi * 1e-12;
    const double ratio = std::pow(hi / lo, 1.0 / (points - 1));
    double s = lo;
    for (int i = 0; i < points; ++i, s *= ratio) {
        double v = f.evaluate(s);
        if (!(v > prev_v) && s > prev_s)
            return s;
        prev_v = v;
        prev_s = s;
    }
    return std::nullopt;
}

namespace {

const char* kind_name(FnKind k) {
    switch (k) {
    case FnKind::Linear: return "linear";
    case FnKind::Power: return "power";
    case FnKind::Identity: return "identity";
    case FnKind::Compose: return "compose";
    case FnKind::Scale: return "scale";
    case FnKind::Sum: return "sum";
    case FnKind::Min: return "min";
    case FnKind::Max: return "max";
    case FnKind::ShiftedIdentityMinus: return "shifted_identity_minus";
    case FnKind::PiecewiseLinear: return "piecewise_linear";
    case FnKind::Inverse: return "inverse";
    }
    return "?";
}

} // namespace

nlohmann::json MonotoneFn::to_json() const {
    nlohmann::json j;
    j["kind"] = kind_name(kind());
    switch (kind()) {
    case FnKind::Linear:
        j["gain"] = param_a();
        break;
    case FnKind::Power:
        j["coeff"] = param_a();
        j["exponent"] = param_b();
        break;
    case FnKind::Identity:
        break;
    case FnKind::Compose:
        j["outer"] = children()[0].to_json();
        j["inner"] = children()[1].to_json();
        break;
    case FnKind::Scale:
        j["factor"] = param_a();
        j["inner"] = children()[0].to_json();
        break;
    case FnKind::Sum:
    case FnKind::Min:
    case FnKind::Max: {
        auto arr = nlohmann::json::array();
        for (const auto& t : children()) arr.push_back(t.to_json());
        j["terms"] = std::move(arr);
        break;
    }
    case FnKind::ShiftedIdentityMinus:
    case FnKind::Inverse:
        j["inner"] = children()[0].to_json();
        break;
    case FnKind::PiecewiseLinear: {
        auto arr = nlohmann::json::array();
        for (const auto& [s, y] : breakpoints()) arr.push_back({s, y});
        j["breakpoints"] = std::move(arr);
        break;
    }
    }
    if (node_->domain_cap)
        j["domain_cap"] = *node_->domain_cap;
    return j;
}

MonotoneFn MonotoneFn::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError("comparison function JSON needs a \"kind\" field");
    const std::string kind = j.at("kind").get<std::string>();
    auto child = [&](const char* key) { return MonotoneFn::from_json(j.at(key)); };
    auto terms = [&]() {
        std::vector<MonotoneFn> out;
        for (const auto& t : j.at("terms")) out.push_back(MonotoneFn::from_json(t));
        return out;
    };
    try {
        MonotoneFn fn = [&]() {
            if (kind == "linear") return linear(j.at("gain").get<double>());
            if (kind == "power")
                return power(j.at("coeff").get<double>(), j.at("exponent").get<double>());
            if (kind == "identity") return identity();
            if (kind == "compose") return compose(child("outer"), child("inner"));
            if (kind == "scale") return scale(j.at("factor").get<double>(), child("inner"));
            if (kind == "sum") return sum(terms());
            if (kind == "min") return min_of(terms());
            if (kind == "max") return max_of(terms());
            if (kind == "shifted_identity_minus") return shifted_identity_minus(child("inner"));
            if (kind == "inverse") return inverse(child("inner"));
            if (kind == "piecewise_linear") {
                std::vector<std::pair<double, double>> pts;
                for (const auto& p : j.at("breakpoints"))
                    pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
                return piecewise_linear(std::move(pts));
            }
            throw ConfigError("unknown comparison function kind: " + kind);
        }();
        if (j.contains("domain_cap"))
            fn = fn.with_domain_cap(j.at("domain_cap").get<double>());
        return fn;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed comparison function JSON: ") + e.what());
    }
}

} // namespace vicert
