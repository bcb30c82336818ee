#include "vicert/problem.hpp"

#include <cmath>
#include <random>

#include "vicert/errors.hpp"

namespace vicert {

bool Box::contains(const double* v, int n) const {
    if (n != dim())
        return false;
    for (int i = 0; i < n; ++i) {
        if (v[i] < lower[i] || v[i] > upper[i] || std::isnan(v[i]))
            return false;
    }
    return true;
}

Box Box::unbounded(int dim) {
    const double inf = std::numeric_limits<double>::infinity();
    Box b;
    b.lower.assign(dim, -inf);
    b.upper.assign(dim, inf);
    return b;
}

std::vector<double> step(const ControlProblem& p, const std::vector<double>& x,
                         const std::vector<double>& u) {
    if (static_cast<int>(x.size()) != p.state_dim || static_cast<int>(u.size()) != p.input_dim)
        throw DomainError("step: dimension mismatch for problem " + p.name);
    if (!p.input_set.contains(u.data(), p.input_dim))
        throw DomainError("step: input outside admissible set of " + p.name);
    std::vector<double> out(p.state_dim);
    p.dynamics(x.data(), u.data(), out.data());
    return out;
}

double sigma(const ControlProblem& p, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != p.state_dim)
        throw DomainError("sigma: dimension mismatch for problem " + p.name);
    return p.measure(x.data());
}

ControlProblem make_cubic_integrator() {
    ControlProblem p;
    p.name = "cubic_integrator";
    p.state_dim = 2;
    p.input_dim = 1;
    p.dynamics = [](const double* x, const double* u, double* out) {
        out[0] = x[0] + u[0];
        out[1] = x[1] + u[0] * u[0] * u[0];
    };
    p.stage_cost = [](const double* x, const double* u) {
        const double a = std::fabs(x[0]);
        const double b = std::fabs(u[0]);
        return a * a * a + std::fabs(x[1]) + b * b * b;
    };
    p.measure = [](const double* x) {
        const double a = std::fabs(x[0]);
        return a * a * a + std::fabs(x[1]);
    };
    p.input_set = Box::unbounded(1);
    p.alpha_v_bar = MonotoneFn::linear(14.0);
    p.alpha_w = MonotoneFn::identity();
    p.sector = SectorBounds{14.0, 1.0, std::numeric_limits<double>::infinity()};
    return p;
}

Sa1Report validate_sa1(const ControlProblem& p, const SamplingSpec& spec) {
    if (spec.state_box.dim() != p.state_dim)
        throw DomainError("validate_sa1: state box dimension mismatch");
    Sa1Report report;
    std::mt19937_64 rng(spec.seed);
    auto draw = [&rng](double lo, double hi) {
        std::uniform_real_distribution<double> dist(lo, hi);
        return dist(rng);
    };

    // Inputs are drawn from the admissible box, with infinite sides replaced
    // by a wide finite window so the sampler terminates.
    const double win = 1e3;
    std::vector<double> x(p.state_dim), u(p.input_dim);
    for (int i = 0; i < spec.state_samples; ++i) {
        for (int d = 0; d < p.state_dim; ++d)
            x[d] = draw(spec.state_box.lower[d], spec.state_box.upper[d]);
        const double lhs = p.alpha_w.evaluate(p.measure(x.data()));
        for (int k = 0; k < spec.input_samples; ++k) {
            for (int d = 0; d < p.input_dim; ++d) {
                double lo = std::max(p.input_set.lower[d], -win);
                double hi = std::min(p.input_set.upper[d], win);
                u[d] = draw(lo, hi);
            }
            const double rhs = p.stage_cost(x.data(), u.data());
            ++report.samples_checked;
            if (lhs > rhs)
                report.violations.push_back({"detectability", x, u, 0.0, lhs, rhs});
        }
    }

    if (p.sector) {
        const double hi = std::min(p.sector->range_limit, 1e6);
        const double lo = hi * 1e-9;
        const double ratio = std::pow(hi / lo, 1.0 / std::max(1, spec.sector_samples - 1));
        double s = lo;
        for (int i = 0; i < spec.sector_samples; ++i, s *= ratio) {
            ++report.samples_checked;
            const double upper = p.alpha_v_bar.evaluate(s);
            if (upper > p.sector->a_v_bar * s)
                report.violations.push_back({"sector_upper", {}, {}, s, upper, p.sector->a_v_bar * s});
            const double lower = p.alpha_w.evaluate(s);
            if (lower < p.sector->a_w * s)
                report.violations.push_back({"sector_lower", {}, {}, s, p.sector->a_w * s, lower});
        }
    }
    return report;
}

namespace {

// One multiplicative term of a polynomial expression:
//   coeff * prod_j factor_j,  factor = v^exp or |v|^exp
// where v is a state or input coordinate.
struct Factor {
    bool is_input = false;
    int index = 0;
    double exponent = 1.0;
    bool absolute = false;
};

struct Term {
    double coeff = 1.0;
    std::vector<Factor> factors;
};

double eval_terms(const std::vector<Term>& terms, const double* x, const double* u) {
    double acc = 0.0;
    for (const auto& t : terms) {
        double prod = t.coeff;
        for (const auto& f : t.factors) {
            double v = f.is_input ? u[f.index] : x[f.index];
            if (f.absolute)
                v = std::fabs(v);
            if (f.exponent == 1.0)
                prod *= v;
            else if (f.exponent == 2.0)
                prod *= v * v;
            else if (f.exponent == 3.0)
                prod *= v * v * v;
            else
                prod *= std::pow(v, f.exponent);
        }
        acc += prod;
    }
    return acc;
}

Factor parse_factor(const nlohmann::json& j, int state_dim, int input_dim) {
    Factor f;
    const std::string var = j.at("var").get<std::string>();
    if (var.size() < 2 || (var[0] != 'x' && var[0] != 'u'))
        throw ConfigError("polynomial factor var must look like x1 or u1, got " + var);
    f.is_input = var[0] == 'u';
    f.index = std::stoi(var.substr(1)) - 1;
    const int dim = f.is_input ? input_dim : state_dim;
    if (f.index < 0 || f.index >= dim)
        throw ConfigError("polynomial factor var out of range: " + var);
    if (j.contains("exp"))
        f.exponent = j.at("exp").get<double>();
    if (j.contains("abs"))
        f.absolute = j.at("abs").get<bool>();
    if (!(f.exponent > 0.0))
        throw ConfigError("polynomial factor exponent must be positive");
    // A signed base with a fractional power goes NaN on negatives; require
    // abs there so expressions stay defined on the whole grid.
    if (!f.absolute && f.exponent != std::floor(f.exponent))
        throw ConfigError("fractional exponent on signed factor " + var + " needs \"abs\": true");
    return f;
}

std::vector<Term> parse_terms(const nlohmann::json& j, int state_dim, int input_dim) {
    std::vector<Term> terms;
    for (const auto& tj : j) {
        Term t;
        t.coeff = tj.at("coeff").get<double>();
        if (tj.contains("factors"))
            for (const auto& fj : tj.at("factors"))
                t.factors.push_back(parse_factor(fj, state_dim, input_dim));
        terms.push_back(std::move(t));
    }
    return terms;
}

double bound_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf")
            return -std::numeric_limits<double>::infinity();
        throw ConfigError("bound strings must be \"inf\" or \"-inf\", got " + s);
    }
    return j.get<double>();
}

} // namespace

ControlProblem problem_from_json(const nlohmann::json& j) {
    try {
        const std::string name = j.at("name").get<std::string>();
        if (name == "cubic_integrator")
            return make_cubic_integrator();
        if (name != "polynomial")
            throw ConfigError("unknown problem name: " + name);

        ControlProblem p;
        p.name = name;
        p.state_dim = j.at("state_dim").get<int>();
        p.input_dim = j.at("input_dim").get<int>();
        if (p.state_dim < 1 || p.state_dim > kMaxDim || p.input_dim < 1 || p.input_dim > kMaxDim)
            throw ConfigError("polynomial problem dims must be in [1, " + std::to_string(kMaxDim) + "]");

        const auto& dyn = j.at("dynamics");
        if (static_cast<int>(dyn.size()) != p.state_dim)
            throw ConfigError("dynamics needs one term table per state coordinate");
        std::vector<std::vector<Term>> rows;
        for (const auto& row : dyn)
            rows.push_back(parse_terms(row, p.state_dim, p.input_dim));
        const int n = p.state_dim;
        p.dynamics = [rows, n](const double* x, const double* u, double* out) {
            for (int i = 0; i < n; ++i)
                out[i] = eval_terms(rows[i], x, u);
        };

        auto cost_terms = parse_terms(j.at("stage_cost"), p.state_dim, p.input_dim);
        p.stage_cost = [cost_terms](const double* x, const double* u) {
            return eval_terms(cost_terms, x, u);
        };
        auto measure_terms = parse_terms(j.at("measure"), p.state_dim, p.input_dim);
        for (const auto& t : measure_terms)
            for (const auto& f : t.factors)
                if (f.is_input)
                    throw ConfigError("measure terms cannot reference input coordinates");
        p.measure = [measure_terms](const double* x) {
            return eval_terms(measure_terms, x, nullptr);
        };

        if (j.contains("input_bounds")) {
            const auto& ib = j.at("input_bounds");
            if (static_cast<int>(ib.size()) != p.input_dim)
                throw ConfigError("input_bounds needs one [lo, hi] pair per input coordinate");
            for (const auto& pair : ib) {
                p.input_set.lower.push_back(bound_from_json(pair.at(0)));
                p.input_set.upper.push_back(bound_from_json(pair.at(1)));
                if (!(p.input_set.lower.back() < p.input_set.upper.back()))
                    throw ConfigError("input bound pair must satisfy lo < hi");
            }
        } else {
            p.input_set = Box::unbounded(p.input_dim);
        }

        p.alpha_v_bar = MonotoneFn::from_json(j.at("alpha_v_bar"));
        p.alpha_w = MonotoneFn::from_json(j.at("alpha_w"));
        if (j.contains("sector")) {
            SectorBounds s;
            s.a_v_bar = j.at("sector").at("a_v_bar").get<double>();
            s.a_w = j.at("sector").at("a_w").get<double>();
            if (j.at("sector").contains("L"))
                s.range_limit = bound_from_json(j.at("sector").at("L"));
            if (!(s.a_v_bar > 0.0) || !(s.a_w > 0.0) || !(s.range_limit > 0.0))
                throw ConfigError("sector constants must be positive");
            p.sector = s;
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed problem JSON: ") + e.what());
    }
}

nlohmann::json cubic_integrator_json() {
    return nlohmann::json{{"name", "cubic_integrator"}};
}

} // namespace vicert
