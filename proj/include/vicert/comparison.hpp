#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace vicert {

enum class FnKind {
    Linear,               // s -> gain * s
    Power,                // s -> coeff * s^exponent
    Identity,             // s -> s
    Compose,              // s -> outer(inner(s))
    Scale,                // s -> factor * inner(s)
    Sum,                  // s -> sum_i terms[i](s)
    Min,                  // s -> min_i terms[i](s)
    Max,                  // s -> max_i terms[i](s)
    ShiftedIdentityMinus, // s -> s - inner(s), validated increasing
    PiecewiseLinear,      // increasing breakpoints, last slope extrapolated
    Inverse,              // s -> inner^{-1}(s), numeric unless inner has a closed form
};

// Immutable expression tree over comparison functions (zero at zero, strictly
// increasing, unbounded unless capped by a domain hint). Copies are cheap and
// share structure; evaluation is pure, so instances can be used from several
// threads at once.
//
// Strictness is the caller's contract for most combinators. The exception is
// ShiftedIdentityMinus, whose constructor samples s - inner(s) and rejects
// decreasing results, because every formula that builds one relies on it.
class MonotoneFn {
public:
    static MonotoneFn linear(double gain);
    static MonotoneFn power(double coeff, double exponent);
    static MonotoneFn identity();
    static MonotoneFn compose(MonotoneFn outer, MonotoneFn inner);
    static MonotoneFn scale(double factor, MonotoneFn inner);
    static MonotoneFn sum(std::vector<MonotoneFn> terms);
    static MonotoneFn min_of(std::vector<MonotoneFn> terms);
    static MonotoneFn max_of(std::vector<MonotoneFn> terms);
    static MonotoneFn shifted_identity_minus(MonotoneFn inner);
    // breakpoints must start at (0,0) and be strictly increasing in both
    // coordinates; values beyond the last breakpoint extend the final slope.
    static MonotoneFn piecewise_linear(std::vector<std::pair<double, double>> breakpoints);
    static MonotoneFn inverse(MonotoneFn inner);

    // Throws DomainError for s < 0 or NaN.
    double evaluate(double s) const;
    double operator()(double s) const { return evaluate(s); }

    FnKind kind() const;

    // Gain g such that the tree provably equals s -> g*s, when that is
    // syntactically visible (linear leaves through linear combinators).
    std::optional<double> linear_gain() const;

    // Upper end of the domain the function is meant to be used on. Purely
    // advisory: evaluate() ignores it, numeric inversion uses it as the
    // bracket cap so targets beyond f(hint) raise RangeError.
    MonotoneFn with_domain_cap(double hi) const;
    std::optional<double> domain_cap() const;

    nlohmann::json to_json() const;
    static MonotoneFn from_json(const nlohmann::json& j);

    // Structural accessors used by serialization and the certificate layer.
    const std::vector<MonotoneFn>& children() const;
    double param_a() const; // gain / coeff / factor, by kind
    double param_b() const; // exponent, by kind
    const std::vector<std::pair<double, double>>& breakpoints() const;

    struct Node; // defined in comparison.cpp

private:
    explicit MonotoneFn(std::shared_ptr<const Node> node);
    std::shared_ptr<const Node> node_;
};

inline constexpr double kInverseTolDefault = 1e-10;

// Solves f(s) = y for s >= 0. Closed form for Linear, Power, Identity and
// PiecewiseLinear (per-segment solve); everything else falls back to
// bisection after geometric bracket growth. On return, both
// |f(s) - y| <= rel_tol * max(1, y) and the bracket width at termination is
// <= rel_tol * max(1, s), so round-tripping through evaluate stays within a
// small multiple of rel_tol. Throws RangeError when y is negative, when y is
// not attained below the domain cap, and DomainError for NaN.
double inverse_evaluate(const MonotoneFn& f, double y, double rel_tol = kInverseTolDefault);

// k-fold self composition f^(k)(s); k = 0 returns s unchanged.
double iterate(const MonotoneFn& f, int k, double s);

// Samples `points` log-spaced arguments in (0, hi] (plus 0 itself) and checks
// strict growth between consecutive samples. Returns the first offending
// sample, or nullopt when the sampled values are strictly increasing.
std::optional<double> first_nonincreasing_sample(const MonotoneFn& f, double hi, int points = 256);

} // namespace vicert
