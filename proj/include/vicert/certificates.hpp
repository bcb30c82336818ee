#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vicert/engine.hpp"

namespace vicert {

// Every bound here is computed on the general comparison-function route
// (composition and numeric inversion of alpha_v_bar / alpha_w). When linear
// sector constants exist they give closed forms; those are evaluated too and
// cross-checked against the general route, and the linear form is asserted
// to dominate, never to replace, the general one.

struct NearOptimalityBound {
    double value = 0.0;              // alpha_v_bar(alpha_w^{-1}(c_stop))
    std::optional<double> linear;    // (a_v_bar / a_w) * c_stop, sector with L = inf only
};

// Width of the guarantee V_d <= V_inf <= V_d + bound at one state, driven by
// the stopping tolerance there.
NearOptimalityBound near_optimality_bound(const ControlProblem& p, const StoppingCriterion& c,
                                          const std::vector<double>& x,
                                          double tol = kInverseTolDefault);
NearOptimalityBound near_optimality_bound_from_cstop(const ControlProblem& p, double c_stop,
                                                     double tol = kInverseTolDefault);

// Threshold on |eps| below which the relative-tolerance stop preserves
// asymptotic stability on all of the verified region: a_w^2 / a_v_bar.
// Throws CertificateUnavailable without infinite-range sector constants.
double epsilon_star_global(const ControlProblem& p);

// Worst-case transient amplification a_v_bar / a_w of the decay envelope.
double overshoot_gain(const ControlProblem& p);

// Contraction factor of the measure under the stopped policy,
//   1 - (a_w^2 - |eps| a_v_bar) / (a_v_bar a_w),
// valid for |eps| < epsilon_star_global (RangeError otherwise).
double decay_base(const ControlProblem& p, double eps_norm);

// overshoot * decay_base^k * sigma0
double decay_envelope(const ControlProblem& p, double eps_norm, double sigma0, int k);

// Certified running-cost excess of the stopped policy over V_inf:
//   (a_v_bar^3 / a_w) * |eps| / (a_w^2 - a_v_bar |eps|)
// Divergence as |eps| approaches the threshold is genuine; RangeError at or
// beyond it.
double running_cost_gap(const ControlProblem& p, double eps_norm);

// Smallest depth d with closed_form_gap_bound(d, 1) <= target, from the
// linear-rate formula; ratios within 1e-9 of an integer snap before floor so
// exact boundaries do not flip on rounding.
int conservative_horizon(const ControlProblem& p, double target = 1.0);

struct Theorem1Bound {
    double value = 0.0;                   // general route
    std::optional<double> closed_form;    // sector route, cross-checked when both are linear
};

// A-priori tail bound on V_inf - V_d at measure level sigma_x: the d-fold
// contraction of alpha_v_bar(sigma) pushed back through alpha_w.
Theorem1Bound theorem1_gap_bound(const ControlProblem& p, int d, double sigma_x,
                                 double tol = kInverseTolDefault);

// Largest |eps| (within [1e-12, 1e3]) for which the semiglobal
// practical-stability condition
//   theta(eps, alpha_w^{-1}(alpha_v_bar(delta_cap))) < rhs(delta_practical)
// holds. nullopt when even the bracket bottom fails (no certificate).
// Requires a theta majorant on the criterion.
std::optional<double> epsilon_star_semiglobal(const ControlProblem& p,
                                              const StoppingCriterion& c, double delta_cap,
                                              double delta_practical, double rel_tol = 1e-9);

// Empirical sandwich audit of a stopped run against a longer run on the same
// grids: checks V_long - V_stop <= v_eps + slack per node, where slack
// covers any excess of the empirical stabilizability gain max(V_long/sigma)
// over the declared a_v_bar (zero when the declared envelope really
// dominates, as it must on snapped instances).
struct SandwichCheck {
    double a_v_hat = 0.0; // max over nodes of V_long / sigma
    bool dominance_ok = false;
    std::int64_t violations = 0;
    double max_excess = 0.0; // max of V_long - V_stop - (v_eps + slack)
};
SandwichCheck sandwich_check(const ControlProblem& p, const ViRun& run, const ViRun& long_run,
                             int margin = 20);

struct LyapunovTerm {
    int k = 0;
    double y_next = 0.0;
    double y_curr = 0.0;
    double alpha_w_sigma = 0.0;
    double v_eps = 0.0;
    double proxy_error = 0.0;  // tail bound on |V_long - V_inf| at this step
    double interp_slack = 0.0; // interpolation cell spread at both lookups
    double slack = 0.0;        // <= 0 when the certified decrease holds
};

struct LyapunovReport {
    std::vector<LyapunovTerm> terms;
    std::int64_t violations = 0;
    int d_long = 0;
};

// Audits the certified Lyapunov decrease along a trajectory, using V_{d_long}
// as the proxy for the limit function. long_run must be at least `margin`
// backups deeper than run.
LyapunovReport lyapunov_decrease_check(const ControlProblem& p, const ViRun& run,
                                       const ViRun& long_run,
                                       const std::vector<std::vector<double>>& states,
                                       int margin = 20);

struct CertificateReport {
    std::string problem;
    std::string criterion;
    std::vector<double> epsilon;
    double eps_norm = 0.0;
    int d = -1;
    bool stopped = false;
    double delta = 0.0;
    std::string interp;
    bool snap_successors = false;

    double v_eps_min = 0.0;
    double v_eps_mean = 0.0;
    double v_eps_max = 0.0;
    std::optional<double> v_eps_linear_max; // linear-route maximum, sector only

    FloorInfo floor;
    bool theta_available = false;

    bool sector_available = false;
    std::optional<double> eps_star_global_value;
    std::optional<double> overshoot;
    std::optional<int> conservative_horizon_value;
    double horizon_target = 1.0;

    bool exponential_applicable = false;
    std::string exponential_reason;
    std::optional<double> decay_base_value;
    std::optional<double> running_cost_gap_value;

    bool semiglobal_attempted = false;
    std::optional<double> eps_star_semiglobal_value;
    bool semiglobal_no_certificate = false;
    double delta_practical = 1.0;

    nlohmann::json to_json() const;
};

struct CertifyOptions {
    double horizon_target = 1.0;
    double delta_practical = 1.0;
    double tol = kInverseTolDefault;
};

CertificateReport build_certificate_report(const ControlProblem& p, const ViRun& run,
                                           const CertifyOptions& opts = {});

} // namespace vicert
