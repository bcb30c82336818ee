#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vicert/comparison.hpp"

namespace vicert {

// Dimensions stay small (a handful of states and inputs); fixed stack buffers
// of this size avoid allocation in the sweep kernel.
inline constexpr int kMaxDim = 8;

struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    int dim() const { return static_cast<int>(lower.size()); }
    bool contains(const double* v, int n) const;
    static Box unbounded(int dim);
};

// Raw-pointer callbacks keep the inner DP loop allocation free. All arrays
// are sized by the owning problem's dims.
using DynamicsFn = std::function<void(const double* x, const double* u, double* out)>;
using StageCostFn = std::function<double(const double* x, const double* u)>;
using MeasureFn = std::function<double(const double* x)>;

// Linear envelopes for the comparison pair, valid on [0, range_limit]:
//   alpha_v_bar(s) <= a_v_bar * s      alpha_w(s) >= a_w * s
// range_limit = inf unlocks the global (infinite-sector) certificates.
struct SectorBounds {
    double a_v_bar = 0.0;
    double a_w = 0.0;
    double range_limit = std::numeric_limits<double>::infinity();
};

struct ControlProblem {
    std::string name;
    int state_dim = 0;
    int input_dim = 0;
    DynamicsFn dynamics;
    StageCostFn stage_cost;
    MeasureFn measure; // sigma: the magnitude the stopping rule weighs
    Box input_set;     // admissible inputs; sides may be infinite
    MonotoneFn alpha_v_bar = MonotoneFn::identity(); // stabilizability: V_inf <= alpha_v_bar(sigma)
    MonotoneFn alpha_w = MonotoneFn::identity();     // detectability: alpha_w(sigma) <= stage cost
    std::optional<SectorBounds> sector;
};

// One-step successor x+ = f(x, u). Throws DomainError when u is outside the
// admissible box or dimensions disagree.
std::vector<double> step(const ControlProblem& p, const std::vector<double>& x,
                         const std::vector<double>& u);

double sigma(const ControlProblem& p, const std::vector<double>& x);

// Double integrator with a cubed input channel:
//   x1+ = x1 + u,  x2+ = x2 + u^3
//   cost |x1|^3 + |x2| + |u|^3,  sigma = |x1|^3 + |x2|
// Unconstrained input; sector constants (14, 1, inf).
ControlProblem make_cubic_integrator();

struct Sa1Violation {
    std::string check; // "detectability" | "sector_upper" | "sector_lower"
    std::vector<double> x;
    std::vector<double> u;
    double s = 0.0; // sampled magnitude for sector checks
    double lhs = 0.0;
    double rhs = 0.0;
};

struct Sa1Report {
    std::int64_t samples_checked = 0;
    std::vector<Sa1Violation> violations;
    bool ok() const { return violations.empty(); }
};

struct SamplingSpec {
    Box state_box;             // where to draw states
    int state_samples = 256;
    int input_samples = 16;    // inputs per state
    int sector_samples = 128;  // magnitudes for the sector envelopes
    std::uint64_t seed = 1;
};

// Samples the detectability inequality alpha_w(sigma(x)) <= cost(x, u) and,
// when sector constants are present, the two linear envelopes. Exact
// inequality, no tolerance: ties pass, any strict violation is reported.
Sa1Report validate_sa1(const ControlProblem& p, const SamplingSpec& spec);

// Problem construction from JSON. Accepts {"name": "cubic_integrator"} or a
// full polynomial description (term tables over x1..xn, u1..um with optional
// absolute-value factors). See README for the schema.
ControlProblem problem_from_json(const nlohmann::json& j);
nlohmann::json cubic_integrator_json();

} // namespace vicert
