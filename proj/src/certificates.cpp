#include "vicert/certificates.hpp"

#include <cmath>
#include <limits>

#include "vicert/errors.hpp"

namespace vicert {

namespace {

const SectorBounds& require_global_sector(const ControlProblem& p, const char* what) {
    if (!p.sector)
        throw CertificateUnavailable(std::string(what) + ": problem " + p.name +
                                     " declares no sector constants");
    if (std::isfinite(p.sector->range_limit))
        throw CertificateUnavailable(std::string(what) + ": sector constants of " + p.name +
                                     " only hold up to sigma = " +
                                     std::to_string(p.sector->range_limit));
    return *p.sector;
}

bool has_global_sector(const ControlProblem& p) {
    return p.sector && !std::isfinite(p.sector->range_limit);
}

} // namespace

NearOptimalityBound near_optimality_bound_from_cstop(const ControlProblem& p, double c_stop,
                                                     double tol) {
    if (!(c_stop >= 0.0))
        throw DomainError("near_optimality_bound: c_stop must be nonnegative");
    NearOptimalityBound b;
    b.value = p.alpha_v_bar.evaluate(inverse_evaluate(p.alpha_w, c_stop, tol));
    if (has_global_sector(p)) {
        b.linear = p.sector->a_v_bar / p.sector->a_w * c_stop;
        // alpha_v_bar <= a_v_bar*s and alpha_w >= a_w*s force the linear
        // route to dominate; a violation means the declared constants are
        // wrong, which must surface rather than produce a bogus certificate.
        if (b.value > *b.linear * (1.0 + 1e-9) + 1e-300)
            throw NumericError("sector constants of " + p.name +
                               " fail to dominate the general bound (" +
                               std::to_string(b.value) + " > " + std::to_string(*b.linear) + ")");
    }
    return b;
}

NearOptimalityBound near_optimality_bound(const ControlProblem& p, const StoppingCriterion& c,
                                          const std::vector<double>& x, double tol) {
    if (static_cast<int>(x.size()) != p.state_dim)
        throw DomainError("near_optimality_bound: state dimension mismatch");
    const double s = p.measure(x.data());
    return near_optimality_bound_from_cstop(p, c.evaluate(x.data(), p.state_dim, s), tol);
}

double epsilon_star_global(const ControlProblem& p) {
    const SectorBounds& s = require_global_sector(p, "epsilon_star_global");
    return s.a_w * s.a_w / s.a_v_bar;
}

double overshoot_gain(const ControlProblem& p) {
    const SectorBounds& s = require_global_sector(p, "overshoot_gain");
    return s.a_v_bar / s.a_w;
}

double decay_base(const ControlProblem& p, double eps_norm) {
    const SectorBounds& s = require_global_sector(p, "decay_base");
    if (!(eps_norm >= 0.0))
        throw DomainError("decay_base: eps must be nonnegative");
    if (!(eps_norm < epsilon_star_global(p)))
        throw RangeError("decay_base: eps = " + std::to_string(eps_norm) +
                         " is not below the stability threshold " +
                         std::to_string(epsilon_star_global(p)));
    return 1.0 - (s.a_w * s.a_w - eps_norm * s.a_v_bar) / (s.a_v_bar * s.a_w);
}

double decay_envelope(const ControlProblem& p, double eps_norm, double sigma0, int k) {
    if (k < 0)
        throw DomainError("decay_envelope: negative step index");
    if (!(sigma0 >= 0.0))
        throw DomainError("decay_envelope: sigma0 must be nonnegative");
    return overshoot_gain(p) * std::pow(decay_base(p, eps_norm), k) * sigma0;
}

double running_cost_gap(const ControlProblem& p, double eps_norm) {
    const SectorBounds& s = require_global_sector(p, "running_cost_gap");
    if (!(eps_norm >= 0.0))
        throw DomainError("running_cost_gap: eps must be nonnegative");
    const double denom = s.a_w * s.a_w - s.a_v_bar * eps_norm;
    if (!(denom > 0.0))
        throw RangeError("running_cost_gap: eps = " + std::to_string(eps_norm) +
                         " is at or beyond the pole " +
                         std::to_string(epsilon_star_global(p)));
    return s.a_v_bar * s.a_v_bar * s.a_v_bar / s.a_w * eps_norm / denom;
}

int conservative_horizon(const ControlProblem& p, double target) {
    const SectorBounds& s = require_global_sector(p, "conservative_horizon");
    if (!(target > 0.0))
        throw DomainError("conservative_horizon: target must be positive");
    if (!(s.a_w < s.a_v_bar))
        throw DomainError("conservative_horizon: needs a_w < a_v_bar for a contracting rate");
    const double level0 = s.a_v_bar * s.a_v_bar / s.a_w; // gap bound at d = 0, sigma = 1
    const double num = std::log(target / level0);
    const double den = std::log1p(-s.a_w / s.a_v_bar);
    double r = num / den;
    if (r < 0.0)
        return 0;
    // Exact integer boundaries (target hitting the bound head-on) must not
    // flip on the last ulp of the logs.
    const double rounded = std::round(r);
    if (std::fabs(r - rounded) <= 1e-9 * std::max(1.0, std::fabs(r)))
        r = rounded;
    return static_cast<int>(std::floor(r));
}

Theorem1Bound theorem1_gap_bound(const ControlProblem& p, int d, double sigma_x, double tol) {
    if (d < 0)
        throw DomainError("theorem1_gap_bound: negative depth");
    if (!(sigma_x >= 0.0))
        throw DomainError("theorem1_gap_bound: sigma must be nonnegative");
    Theorem1Bound out;
    if (sigma_x == 0.0) {
        out.value = 0.0;
        if (has_global_sector(p))
            out.closed_form = 0.0;
        return out;
    }

    // General route: contract alpha_v_bar(sigma) d times by
    // s -> s - alpha_w(alpha_v_bar^{-1}(s)), then push through
    // alpha_v_bar o alpha_w^{-1}.
    const MonotoneFn contraction = MonotoneFn::shifted_identity_minus(
        MonotoneFn::compose(p.alpha_w, MonotoneFn::inverse(p.alpha_v_bar)));
    const double tail = iterate(contraction, d, p.alpha_v_bar.evaluate(sigma_x));
    out.value = p.alpha_v_bar.evaluate(inverse_evaluate(p.alpha_w, tail, tol));

    if (has_global_sector(p)) {
        const SectorBounds& s = *p.sector;
        out.closed_form = s.a_v_bar * s.a_v_bar / s.a_w *
                          std::pow(1.0 - s.a_w / s.a_v_bar, d) * sigma_x;
        // With genuinely linear envelope functions the two routes compute
        // the same number; disagreement indicates a broken inversion.
        const auto gv = p.alpha_v_bar.linear_gain();
        const auto gw = p.alpha_w.linear_gain();
        if (gv && gw && *gv == s.a_v_bar && *gw == s.a_w) {
            const double ref = *out.closed_form;
            if (std::fabs(out.value - ref) > 1e-9 * std::max(1.0, std::fabs(ref)))
                throw NumericError("theorem1_gap_bound: general route " +
                                   std::to_string(out.value) + " disagrees with closed form " +
                                   std::to_string(ref) + " at d = " + std::to_string(d));
        }
    }
    return out;
}

std::optional<double> epsilon_star_semiglobal(const ControlProblem& p, const StoppingCriterion& c,
                                              double delta_cap, double delta_practical,
                                              double rel_tol) {
    if (!c.has_theta())
        throw CertificateUnavailable(
            "epsilon_star_semiglobal: criterion has no theta majorant (kind " +
            std::string(criterion_kind_name(c.kind)) + ")");
    if (!(delta_cap > 0.0) || !(delta_practical > 0.0) || delta_practical > delta_cap)
        throw DomainError("epsilon_star_semiglobal: need 0 < delta_practical <= delta_cap");

    // alpha_tilde = alpha_w o alpha_v_bar^{-1}; its half must leave the
    // identity increasing for the construction to make sense (asserted by
    // the ShiftedIdentityMinus constructor).
    const MonotoneFn alpha_tilde =
        MonotoneFn::compose(p.alpha_w, MonotoneFn::inverse(p.alpha_v_bar));
    (void)MonotoneFn::shifted_identity_minus(alpha_tilde);
    const MonotoneFn half_shift =
        MonotoneFn::shifted_identity_minus(MonotoneFn::scale(0.5, alpha_tilde));

    const double delta_grown = p.alpha_v_bar.evaluate(delta_cap);
    const double delta_tilde =
        inverse_evaluate(half_shift, p.alpha_w.evaluate(delta_practical));
    const double sigma_probe = inverse_evaluate(p.alpha_w, delta_grown);
    const double rhs = alpha_tilde.evaluate(0.5 * alpha_tilde.evaluate(delta_tilde));

    auto holds = [&](double e) { return *c.theta(e, sigma_probe) < rhs; };

    double lo = 1e-12;
    double hi = 1e3;
    if (!holds(lo))
        return std::nullopt; // unsatisfiable within the search bracket
    if (holds(hi))
        return hi;
    while (hi - lo > rel_tol * lo) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        (holds(mid) ? lo : hi) = mid;
    }
    return lo;
}

SandwichCheck sandwich_check(const ControlProblem& p, const ViRun& run, const ViRun& long_run,
                             int margin) {
    if (!run.states.same_layout(long_run.states))
        throw DomainError("sandwich_check: runs use different state grids");
    if (long_run.d < run.d + margin)
        throw DomainError("sandwich_check: long run is only " + std::to_string(long_run.d) +
                          " deep; need at least " + std::to_string(run.d + margin));

    SandwichCheck out;
    const std::int64_t n = run.states.node_count();
    const SectorBounds* sector = has_global_sector(p) ? &*p.sector : nullptr;

    for (std::int64_t i = 0; i < n; ++i) {
        const double s = run.sigma_nodes[static_cast<size_t>(i)];
        const double v_long = long_run.v_curr.values[static_cast<size_t>(i)];
        if (s > 0.0)
            out.a_v_hat = std::max(out.a_v_hat, v_long / s);
    }
    const double declared = sector ? sector->a_v_bar : 0.0;
    out.dominance_ok = sector ? out.a_v_hat <= declared : false;

    double x[kMaxDim];
    for (std::int64_t i = 0; i < n; ++i) {
        const double v_stop = run.v_curr.values[static_cast<size_t>(i)];
        const double v_long = long_run.v_curr.values[static_cast<size_t>(i)];
        if (v_long < v_stop)
            throw NumericError("sandwich_check: deeper table went below the stopped table at node " +
                               std::to_string(i));
        run.states.node_state(i, x);
        const double s = run.sigma_nodes[static_cast<size_t>(i)];
        const double c = run.criterion.evaluate(x, run.states.dim(), s);
        const double v_eps = near_optimality_bound_from_cstop(p, c).value;
        // Excess of the empirical gain over the declared envelope feeds an
        // honest extra allowance; zero when the envelope dominates.
        double slack = 0.0;
        if (sector && out.a_v_hat > declared)
            slack = (out.a_v_hat - declared) / sector->a_w * c;
        const double excess = v_long - v_stop - (v_eps + slack);
        out.max_excess = std::max(out.max_excess, excess);
        if (excess > 0.0)
            ++out.violations;
    }
    return out;
}

LyapunovReport lyapunov_decrease_check(const ControlProblem& p, const ViRun& run,
                                       const ViRun& long_run,
                                       const std::vector<std::vector<double>>& states,
                                       int margin) {
    if (!run.states.same_layout(long_run.states))
        throw DomainError("lyapunov_decrease_check: runs use different state grids");
    if (long_run.d < run.d + margin)
        throw DomainError("lyapunov_decrease_check: proxy run must be at least " +
                          std::to_string(margin) + " backups deeper");
    LyapunovReport report;
    report.d_long = long_run.d;
    if (states.size() < 2)
        return report;

    const int n = run.states.dim();
    for (size_t k = 0; k + 1 < states.size(); ++k) {
        const auto& xk = states[k];
        const auto& xn = states[k + 1];
        if (static_cast<int>(xk.size()) != n || static_cast<int>(xn.size()) != n)
            throw DomainError("lyapunov_decrease_check: trajectory state dimension mismatch");
        LyapunovTerm term;
        term.k = static_cast<int>(k);
        term.y_curr = value_at(long_run.v_curr, xk.data());
        term.y_next = value_at(long_run.v_curr, xn.data());
        const double s = p.measure(xk.data());
        term.alpha_w_sigma = p.alpha_w.evaluate(s);
        const double c = run.criterion.evaluate(xk.data(), n, s);
        term.v_eps = near_optimality_bound_from_cstop(p, c).value;
        const double s_next = p.measure(xn.data());
        term.proxy_error =
            theorem1_gap_bound(p, long_run.d, std::max(s, s_next)).value;
        term.interp_slack =
            cell_spread(long_run.v_curr, xk.data()) + cell_spread(long_run.v_curr, xn.data());
        term.slack = term.y_next - term.y_curr + term.alpha_w_sigma - term.v_eps -
                     2.0 * term.proxy_error - term.interp_slack;
        if (term.slack > 0.0)
            ++report.violations;
        report.terms.push_back(term);
    }
    return report;
}

CertificateReport build_certificate_report(const ControlProblem& p, const ViRun& run,
                                           const CertifyOptions& opts) {
    if (run.d < 0)
        throw DomainError("build_certificate_report: run has no completed backup");
    CertificateReport r;
    r.problem = p.name;
    r.criterion = criterion_kind_name(run.criterion.kind);
    r.epsilon = run.criterion.epsilon;
    r.eps_norm = run.criterion.eps_norm();
    r.d = run.d;
    r.stopped = run.stopped;
    r.delta = run.delta;
    r.interp = interp_mode_name(run.backup.interp);
    r.snap_successors = run.backup.snap_successors;
    r.horizon_target = opts.horizon_target;
    r.delta_practical = opts.delta_practical;
    r.floor = run.criterion.floor_info(run.delta);
    r.theta_available = run.criterion.has_theta();
    r.sector_available = has_global_sector(p);

    // Per-node guarantee width, both routes where available.
    const std::int64_t n = run.states.node_count();
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = 0.0;
    double vsum = 0.0;
    double linear_max = 0.0;
    double x[kMaxDim];
    for (std::int64_t i = 0; i < n; ++i) {
        run.states.node_state(i, x);
        const double s = run.sigma_nodes[static_cast<size_t>(i)];
        const double c = run.criterion.evaluate(x, run.states.dim(), s);
        const NearOptimalityBound b = near_optimality_bound_from_cstop(p, c, opts.tol);
        vmin = std::min(vmin, b.value);
        vmax = std::max(vmax, b.value);
        vsum += b.value;
        if (b.linear)
            linear_max = std::max(linear_max, *b.linear);
    }
    r.v_eps_min = vmin;
    r.v_eps_max = vmax;
    r.v_eps_mean = vsum / static_cast<double>(n);
    if (r.sector_available)
        r.v_eps_linear_max = linear_max;

    if (r.sector_available) {
        r.eps_star_global_value = epsilon_star_global(p);
        r.overshoot = overshoot_gain(p);
        if (p.sector->a_w < p.sector->a_v_bar)
            r.conservative_horizon_value = conservative_horizon(p, opts.horizon_target);
    }

    // The exponential-decay certificates need the stop tolerance to vanish
    // at least linearly with sigma; of the built-in kinds, Relative and
    // MixedMin (c <= |eps| sigma) qualify.
    const bool kind_ok = run.criterion.kind == CriterionKind::Relative ||
                         run.criterion.kind == CriterionKind::MixedMin;
    if (!r.sector_available) {
        r.exponential_reason = "no infinite-range sector constants";
    } else if (!kind_ok) {
        r.exponential_reason = std::string("criterion kind ") + r.criterion +
                               " does not vanish linearly with sigma";
    } else if (!(r.eps_norm < *r.eps_star_global_value)) {
        r.exponential_reason = "eps = " + std::to_string(r.eps_norm) +
                               " not below eps_star = " +
                               std::to_string(*r.eps_star_global_value);
    } else {
        r.exponential_applicable = true;
        r.decay_base_value = decay_base(p, r.eps_norm);
        r.running_cost_gap_value = running_cost_gap(p, r.eps_norm);
    }

    if (r.theta_available && opts.delta_practical <= run.delta && run.delta > 0.0) {
        r.semiglobal_attempted = true;
        r.eps_star_semiglobal_value =
            epsilon_star_semiglobal(p, run.criterion, run.delta, opts.delta_practical);
        r.semiglobal_no_certificate = !r.eps_star_semiglobal_value.has_value();
    }
    return r;
}

nlohmann::json CertificateReport::to_json() const {
    nlohmann::json j;
    j["problem"] = problem;
    j["criterion"] = {{"kind", criterion}, {"epsilon", epsilon}, {"eps_norm", eps_norm}};
    j["run"] = {{"d", d},
                {"stopped", stopped},
                {"delta", delta},
                {"interp", interp},
                {"snap_successors", snap_successors}};
    j["v_eps"] = {{"min", v_eps_min}, {"mean", v_eps_mean}, {"max", v_eps_max}};
    if (v_eps_linear_max)
        j["v_eps"]["linear_route_max"] = *v_eps_linear_max;

    nlohmann::json fl;
    fl["kind"] = floor.kind == FloorKind::Constant ? "constant"
                 : floor.kind == FloorKind::Linear ? "linear"
                                                   : "unspecified";
    if (floor.epsilon_lower)
        fl["epsilon_lower"] = *floor.epsilon_lower;
    if (!floor.note.empty())
        fl["note"] = floor.note;
    j["tolerance_floor"] = std::move(fl);
    j["theta_available"] = theta_available;

    j["sector_available"] = sector_available;
    if (eps_star_global_value)
        j["eps_star_global"] = *eps_star_global_value;
    if (overshoot)
        j["overshoot"] = *overshoot;
    if (conservative_horizon_value) {
        j["conservative_horizon"] = *conservative_horizon_value;
        j["conservative_horizon_target"] = horizon_target;
    }

    j["exponential"] = {{"applicable", exponential_applicable}};
    if (!exponential_applicable)
        j["exponential"]["reason"] = exponential_reason;
    if (decay_base_value)
        j["exponential"]["decay_base"] = *decay_base_value;
    if (running_cost_gap_value)
        j["exponential"]["running_cost_gap"] = *running_cost_gap_value;

    j["semiglobal"] = {{"attempted", semiglobal_attempted}};
    if (semiglobal_attempted) {
        j["semiglobal"]["delta_practical"] = delta_practical;
        j["semiglobal"]["no_certificate"] = semiglobal_no_certificate;
        if (eps_star_semiglobal_value)
            j["semiglobal"]["eps_star"] = *eps_star_semiglobal_value;
    }
    return j;
}

} // namespace vicert
