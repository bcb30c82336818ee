#include "vicert/stopping.hpp"

#include <algorithm>
#include <cmath>

#include "vicert/errors.hpp"

namespace vicert {

const char* criterion_kind_name(CriterionKind k) {
    switch (k) {
    case CriterionKind::Uniform: return "uniform";
    case CriterionKind::Relative: return "relative";
    case CriterionKind::MixedMin: return "mixed_min";
    case CriterionKind::MaxOfUniformRelative: return "max_of_uniform_relative";
    case CriterionKind::QuadraticForm: return "quadratic_form";
    case CriterionKind::Custom: return "custom";
    }
    return "?";
}

double StoppingCriterion::eps_norm() const {
    double acc = 0.0;
    for (double e : epsilon)
        acc += e * e;
    return std::sqrt(acc);
}

double StoppingCriterion::evaluate(const double* x, int n, double sigma_x) const {
    switch (kind) {
    case CriterionKind::Uniform:
        return eps_norm();
    case CriterionKind::Relative:
        return eps_norm() * sigma_x;
    case CriterionKind::MixedMin:
        return eps_norm() * std::min(sigma_x, 1.0);
    case CriterionKind::MaxOfUniformRelative:
        return std::max(std::fabs(epsilon[0]), std::fabs(epsilon[1]) * sigma_x);
    case CriterionKind::QuadraticForm: {
        if (n != matrix_dim)
            throw DomainError("quadratic criterion evaluated at wrong state dimension");
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            double row = 0.0;
            for (int j = 0; j < n; ++j)
                row += s_matrix[static_cast<size_t>(i) * n + j] * x[j];
            acc += x[i] * row;
        }
        return acc;
    }
    case CriterionKind::Custom:
        return custom(x, n, sigma_x);
    }
    throw NumericError("corrupt criterion kind");
}

std::optional<double> StoppingCriterion::theta(double e, double s) const {
    if (e < 0.0 || s < 0.0)
        throw DomainError("theta arguments must be nonnegative");
    if (theta_override) {
        const double ef = theta_override->first.evaluate(e);
        const double sf = theta_override->second ? theta_override->second->evaluate(s) : 1.0;
        return ef * sf;
    }
    switch (kind) {
    case CriterionKind::Uniform:
        return e;
    case CriterionKind::Relative:
        return e * s;
    case CriterionKind::MixedMin:
        return e * std::min(s, 1.0);
    case CriterionKind::MaxOfUniformRelative:
        return e * std::max(1.0, s);
    case CriterionKind::QuadraticForm:
    case CriterionKind::Custom:
        return std::nullopt;
    }
    throw NumericError("corrupt criterion kind");
}

bool StoppingCriterion::has_theta() const {
    return theta(0.0, 0.0).has_value();
}

FloorInfo StoppingCriterion::floor_info(double region_bound) const {
    FloorInfo info;
    if (floor_epsilon_override) {
        info.epsilon_lower = *floor_epsilon_override;
        info.note = "user-supplied floor";
    }
    switch (kind) {
    case CriterionKind::Uniform:
        info.kind = FloorKind::Constant;
        if (!info.epsilon_lower)
            info.epsilon_lower = eps_norm();
        return info;
    case CriterionKind::MaxOfUniformRelative:
        info.kind = FloorKind::Constant;
        if (!info.epsilon_lower)
            info.epsilon_lower = std::fabs(epsilon[0]);
        return info;
    case CriterionKind::Relative:
        info.kind = FloorKind::Linear;
        if (!info.epsilon_lower)
            info.epsilon_lower = eps_norm();
        return info;
    case CriterionKind::MixedMin:
        info.kind = FloorKind::Linear;
        if (!info.epsilon_lower) {
            // c = |eps| min(sigma, 1) >= (|eps| / max(1, bound)) sigma holds
            // only where sigma <= bound.
            info.epsilon_lower = eps_norm() / std::max(1.0, region_bound);
            info.note = "linear floor valid on sigma <= " + std::to_string(region_bound);
        }
        return info;
    case CriterionKind::QuadraticForm:
        info.kind = FloorKind::Linear;
        if (!info.epsilon_lower)
            info.note = "no derivable sigma floor for a quadratic form; supply floor_epsilon";
        return info;
    case CriterionKind::Custom:
        info.kind = info.epsilon_lower ? FloorKind::Linear : FloorKind::Unspecified;
        if (!info.epsilon_lower)
            info.note = "custom criterion: floor must be supplied";
        return info;
    }
    throw NumericError("corrupt criterion kind");
}

namespace {

StoppingCriterion base_criterion(CriterionKind kind, std::vector<double> eps) {
    for (double e : eps)
        if (!(e >= 0.0) || !std::isfinite(e))
            throw ConfigError("criterion epsilon entries must be finite and nonnegative");
    StoppingCriterion c;
    c.kind = kind;
    c.epsilon = std::move(eps);
    return c;
}

} // namespace

StoppingCriterion uniform_criterion(double eps) {
    return base_criterion(CriterionKind::Uniform, {eps});
}

StoppingCriterion relative_criterion(double eps) {
    return base_criterion(CriterionKind::Relative, {eps});
}

StoppingCriterion mixed_min_criterion(double eps) {
    return base_criterion(CriterionKind::MixedMin, {eps});
}

StoppingCriterion max_of_uniform_relative_criterion(double eps_uniform, double eps_relative) {
    return base_criterion(CriterionKind::MaxOfUniformRelative, {eps_uniform, eps_relative});
}

StoppingCriterion quadratic_form_criterion(std::vector<double> s_matrix, int n,
                                           std::vector<double> epsilon) {
    if (n < 1 || static_cast<int>(s_matrix.size()) != n * n)
        throw ConfigError("quadratic criterion matrix must be n*n");
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double a = s_matrix[static_cast<size_t>(i) * n + j];
            const double b = s_matrix[static_cast<size_t>(j) * n + i];
            if (std::fabs(a - b) > 1e-12 * std::max(1.0, std::fabs(a)))
                throw ConfigError("quadratic criterion matrix must be symmetric");
        }
    const double lambda_min = smallest_symmetric_eigenvalue(s_matrix, n);
    if (!(lambda_min > 0.0))
        throw ConfigError("quadratic criterion matrix must be positive definite (lambda_min = " +
                          std::to_string(lambda_min) + ")");
    StoppingCriterion c =
        base_criterion(CriterionKind::QuadraticForm, epsilon.empty() ? s_matrix : std::move(epsilon));
    c.s_matrix = std::move(s_matrix);
    c.matrix_dim = n;
    return c;
}

StoppingCriterion custom_criterion(CustomCriterionFn fn, std::string name,
                                   std::vector<double> epsilon) {
    if (!fn)
        throw ConfigError("custom criterion needs a callable");
    StoppingCriterion c = base_criterion(CriterionKind::Custom, std::move(epsilon));
    c.custom = std::move(fn);
    c.custom_name = std::move(name);
    return c;
}

double smallest_symmetric_eigenvalue(const std::vector<double>& s_rowmajor, int n) {
    if (n < 1 || static_cast<int>(s_rowmajor.size()) != n * n)
        throw DomainError("smallest_symmetric_eigenvalue: matrix must be n*n");
    std::vector<double> a = s_rowmajor;
    auto at = [&a, n](int i, int j) -> double& { return a[static_cast<size_t>(i) * n + j]; };
    // Cyclic Jacobi: rotate away the largest off-diagonal entry until the
    // matrix is numerically diagonal. Fine for the tiny dims used here.
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                off = std::max(off, std::fabs(at(i, j)));
        if (off < 1e-14)
            break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::fabs(at(p, q)) < 1e-300)
                    continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    double lambda = at(0, 0);
    for (int i = 1; i < n; ++i)
        lambda = std::min(lambda, at(i, i));
    return lambda;
}

nlohmann::json StoppingCriterion::to_json() const {
    if (kind == CriterionKind::Custom)
        throw ConfigError("custom criteria exist only in code and cannot be serialized");
    nlohmann::json j;
    j["kind"] = criterion_kind_name(kind);
    j["epsilon"] = epsilon;
    if (kind == CriterionKind::QuadraticForm) {
        auto rows = nlohmann::json::array();
        for (int i = 0; i < matrix_dim; ++i) {
            auto row = nlohmann::json::array();
            for (int jx = 0; jx < matrix_dim; ++jx)
                row.push_back(s_matrix[static_cast<size_t>(i) * matrix_dim + jx]);
            rows.push_back(std::move(row));
        }
        j["s_matrix"] = std::move(rows);
    }
    if (theta_override) {
        j["theta"]["eps"] = theta_override->first.to_json();
        if (theta_override->second)
            j["theta"]["sigma"] = theta_override->second->to_json();
    }
    if (floor_epsilon_override)
        j["floor_epsilon"] = *floor_epsilon_override;
    return j;
}

StoppingCriterion StoppingCriterion::from_json(const nlohmann::json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        std::vector<double> eps;
        if (j.contains("epsilon"))
            eps = j.at("epsilon").get<std::vector<double>>();
        StoppingCriterion c = [&]() {
            if (kind == "uniform" || kind == "relative" || kind == "mixed_min") {
                if (eps.size() != 1)
                    throw ConfigError(kind + " criterion needs exactly one epsilon");
                if (kind == "uniform") return uniform_criterion(eps[0]);
                if (kind == "relative") return relative_criterion(eps[0]);
                return mixed_min_criterion(eps[0]);
            }
            if (kind == "max_of_uniform_relative") {
                if (eps.size() != 2)
                    throw ConfigError("max_of_uniform_relative needs [eps_uniform, eps_relative]");
                return max_of_uniform_relative_criterion(eps[0], eps[1]);
            }
            if (kind == "quadratic_form") {
                const auto& rows = j.at("s_matrix");
                const int n = static_cast<int>(rows.size());
                std::vector<double> s;
                for (const auto& row : rows) {
                    if (static_cast<int>(row.size()) != n)
                        throw ConfigError("quadratic criterion matrix must be square");
                    for (const auto& v : row)
                        s.push_back(v.get<double>());
                }
                return quadratic_form_criterion(std::move(s), n, std::move(eps));
            }
            throw ConfigError("unknown criterion kind: " + kind);
        }();
        if (j.contains("theta")) {
            auto epart = MonotoneFn::from_json(j.at("theta").at("eps"));
            std::optional<MonotoneFn> spart;
            if (j.at("theta").contains("sigma"))
                spart = MonotoneFn::from_json(j.at("theta").at("sigma"));
            c.theta_override = std::make_pair(std::move(epart), std::move(spart));
        }
        if (j.contains("floor_epsilon"))
            c.floor_epsilon_override = j.at("floor_epsilon").get<double>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed criterion JSON: ") + e.what());
    }
}

} // namespace vicert
