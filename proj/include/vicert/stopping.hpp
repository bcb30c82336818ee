#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vicert/comparison.hpp"

namespace vicert {

enum class CriterionKind {
    Uniform,              // c = |eps|
    Relative,             // c = |eps| * sigma(x)
    MixedMin,             // c = |eps| * min(sigma(x), 1)
    MaxOfUniformRelative, // c = max(|eps1|, |eps2| * sigma(x))
    QuadraticForm,        // c = x' S x, S symmetric positive definite
    Custom,               // in-code callback, not serializable
};

const char* criterion_kind_name(CriterionKind k);

// How the tolerance behaves near sigma = 0. Constant floors keep a positive
// gap allowance everywhere; linear floors scale it away with sigma, which is
// what the contraction-style certificates need.
enum class FloorKind { Constant, Linear, Unspecified };

struct FloorInfo {
    FloorKind kind = FloorKind::Unspecified;
    std::optional<double> epsilon_lower;
    std::string note;
};

using CustomCriterionFn = std::function<double(const double* x, int n, double sigma_x)>;

// State-dependent stopping tolerance c(eps, x). Instances are immutable value
// types; evaluate() is pure.
struct StoppingCriterion {
    CriterionKind kind = CriterionKind::Uniform;
    std::vector<double> epsilon; // parameter vector; |eps| enters the certificates
    std::vector<double> s_matrix; // row-major n*n, QuadraticForm only
    int matrix_dim = 0;
    std::string custom_name;
    CustomCriterionFn custom;

    // Optional user majorant theta(e, s) = eps_part(e) * sigma_part(s)
    // (sigma_part absent means the constant 1). Overrides the built-in.
    std::optional<std::pair<MonotoneFn, std::optional<MonotoneFn>>> theta_override;
    std::optional<double> floor_epsilon_override;

    double eps_norm() const;
    double evaluate(const double* x, int n, double sigma_x) const;

    // Majorant theta with c(eps, x) <= theta(|eps|, sigma(x)). Built in for
    // the four closed-form kinds; absent for QuadraticForm and Custom unless
    // the user supplies one.
    std::optional<double> theta(double e, double s) const;
    bool has_theta() const;

    // region_bound is the largest sigma the stop check ranges over; MixedMin
    // only admits a linear floor on such a bounded region.
    FloorInfo floor_info(double region_bound) const;

    nlohmann::json to_json() const; // throws ConfigError for Custom
    static StoppingCriterion from_json(const nlohmann::json& j);
};

StoppingCriterion uniform_criterion(double eps);
StoppingCriterion relative_criterion(double eps);
StoppingCriterion mixed_min_criterion(double eps);
StoppingCriterion max_of_uniform_relative_criterion(double eps_uniform, double eps_relative);
// S is row-major n*n; must be symmetric and positive definite (checked via
// the smallest eigenvalue). epsilon defaults to the flattened matrix.
StoppingCriterion quadratic_form_criterion(std::vector<double> s_matrix, int n,
                                           std::vector<double> epsilon = {});
StoppingCriterion custom_criterion(CustomCriterionFn fn, std::string name,
                                   std::vector<double> epsilon);

// Smallest eigenvalue of a symmetric matrix (cyclic Jacobi; dims stay tiny).
double smallest_symmetric_eigenvalue(const std::vector<double>& s_rowmajor, int n);

} // namespace vicert
