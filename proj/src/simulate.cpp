#include "vicert/simulate.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "vicert/certificates.hpp"
#include "vicert/errors.hpp"
#include "vicert/fmt.hpp"

namespace vicert {

Trajectory closed_loop(const ControlProblem& p, const ValueTable& v_prev,
                       const InputGrid& inputs, const std::vector<double>& x0, int steps,
                       const SimulateOptions& opts, const std::vector<std::int32_t>* policy) {
    if (static_cast<int>(x0.size()) != p.state_dim)
        throw DomainError("closed_loop: x0 dimension mismatch");
    if (v_prev.grid.dim() != p.state_dim || inputs.dim() != p.input_dim)
        throw DomainError("closed_loop: table or input grid does not match the problem");
    if (steps < 0)
        throw DomainError("closed_loop: negative step count");
    if (opts.mode == LookaheadMode::NearestNodePolicy) {
        if (!policy || policy->size() != static_cast<size_t>(v_prev.grid.node_count()))
            throw DomainError("closed_loop: nearest-node mode needs the policy table");
    }

    const std::int64_t n_inputs = inputs.node_count();
    const int id = inputs.dim();
    std::vector<double> us(static_cast<size_t>(n_inputs) * id);
    for (std::int64_t j = 0; j < n_inputs; ++j)
        inputs.node_state(j, &us[static_cast<size_t>(j) * id]);

    const InterpPlan plan(v_prev.grid,
                          opts.snap_successors ? InterpMode::NearestNeighbor : v_prev.interp);
    const double* vals = v_prev.values.data();
    const double inf = std::numeric_limits<double>::infinity();

    Trajectory t;
    t.states.reserve(static_cast<size_t>(steps) + 1);
    std::vector<double> x = x0;
    t.states.push_back(x);
    t.sigma_values.push_back(p.measure(x.data()));

    double xnext[kMaxDim];
    for (int k = 0; k < steps; ++k) {
        std::int32_t best_j = -1;
        if (opts.mode == LookaheadMode::NearestNodePolicy) {
            best_j = (*policy)[static_cast<size_t>(v_prev.grid.nearest_node(x.data()))];
        } else {
            // Two passes: guarded first, then unguarded if the admissibility
            // bound rejected every input (so a selection always exists).
            const bool guard = opts.admissible_measure_bound.has_value();
            for (int pass = guard ? 0 : 1; pass < 2 && best_j < 0; ++pass) {
                double best = inf;
                for (std::int64_t j = 0; j < n_inputs; ++j) {
                    const double* u = &us[static_cast<size_t>(j) * id];
                    p.dynamics(x.data(), u, xnext);
                    if (pass == 0 && p.measure(xnext) > *opts.admissible_measure_bound)
                        continue;
                    bool clamped = false;
                    const double q = p.stage_cost(x.data(), u) + plan.eval(vals, xnext, &clamped);
                    if (!std::isfinite(q))
                        throw NumericError("closed_loop: non-finite lookahead at step " +
                                           std::to_string(k));
                    t.saturated = t.saturated || clamped;
                    if (q < best) {
                        best = q;
                        best_j = static_cast<std::int32_t>(j);
                    }
                }
            }
        }

        const double* u = &us[static_cast<size_t>(best_j) * id];
        t.input_indices.push_back(best_j);
        t.inputs.emplace_back(u, u + id);
        t.stage_costs.push_back(p.stage_cost(x.data(), u));

        p.dynamics(x.data(), u, xnext);
        if (opts.snap_successors) {
            // Evolve the finite chain: the successor is the node itself.
            v_prev.grid.node_state(v_prev.grid.nearest_node(xnext), xnext);
        }
        x.assign(xnext, xnext + p.state_dim);
        t.states.push_back(x);
        t.sigma_values.push_back(p.measure(x.data()));
    }
    return t;
}

double running_cost_estimate(const Trajectory& t) {
    double acc = 0.0;
    for (double c : t.stage_costs)
        acc += c;
    return acc;
}

EnvelopeCheck envelope_check(const ControlProblem& p, const ViRun& run, const Trajectory& t,
                             double grid_slack) {
    if (t.sigma_values.empty())
        throw DomainError("envelope_check: empty trajectory");
    EnvelopeCheck out;

    const bool kind_ok = run.criterion.kind == CriterionKind::Relative ||
                         run.criterion.kind == CriterionKind::MixedMin;
    const bool sector_ok = p.sector && !std::isfinite(p.sector->range_limit);
    const double eps = run.criterion.eps_norm();

    if (!sector_ok) {
        out.refusal_reason = "no infinite-range sector constants";
    } else if (!kind_ok) {
        out.refusal_reason = std::string("criterion kind ") +
                             criterion_kind_name(run.criterion.kind) +
                             " does not vanish linearly with sigma";
    } else if (!(eps < epsilon_star_global(p))) {
        out.refusal_reason = "eps not below the stability threshold";
    } else {
        out.exponential_claimed = true;
    }

    if (out.exponential_claimed) {
        const double sigma0 = t.sigma_values.front();
        out.envelope.reserve(t.sigma_values.size());
        for (size_t k = 0; k < t.sigma_values.size(); ++k) {
            const double env = decay_envelope(p, eps, sigma0, static_cast<int>(k));
            out.envelope.push_back(env);
            const double s = t.sigma_values[k];
            if (s > env + grid_slack) {
                ++out.violations;
                out.delta_practical = std::max(out.delta_practical, s);
            }
            if (env > 0.0)
                out.max_ratio = std::max(out.max_ratio, s / env);
            else if (s > 0.0)
                out.max_ratio = std::numeric_limits<double>::infinity();
        }
    } else {
        for (double s : t.sigma_values)
            out.delta_practical = std::max(out.delta_practical, s);
    }
    return out;
}

void export_trajectory_csv(const std::string& path, const Trajectory& t,
                           const std::vector<double>* envelope) {
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw ConfigError("cannot open " + path + " for writing");
    const int n = t.states.empty() ? 0 : static_cast<int>(t.states.front().size());
    const int m = t.inputs.empty() ? 0 : static_cast<int>(t.inputs.front().size());
    os << "k";
    for (int d = 0; d < n; ++d)
        os << ",x" << d;
    for (int d = 0; d < m; ++d)
        os << ",u" << d;
    os << ",stage_cost,sigma";
    if (envelope)
        os << ",envelope";
    os << "\n";
    for (size_t k = 0; k < t.states.size(); ++k) {
        os << k;
        for (double v : t.states[k])
            os << "," << fmt_double(v);
        for (int d = 0; d < m; ++d)
            os << "," << (k < t.inputs.size() ? fmt_double(t.inputs[k][d]) : "");
        os << "," << (k < t.stage_costs.size() ? fmt_double(t.stage_costs[k]) : "");
        os << "," << fmt_double(t.sigma_values[k]);
        if (envelope)
            os << "," << (k < envelope->size() ? fmt_double((*envelope)[k]) : "");
        os << "\n";
    }
}

} // namespace vicert
