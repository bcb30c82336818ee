#include "vicert/engine.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "vicert/errors.hpp"

namespace vicert {

namespace {

std::vector<double> node_coordinates(const RectGrid& g) {
    const int n = g.dim();
    std::vector<double> coords(static_cast<size_t>(g.node_count()) * n);
    for (std::int64_t i = 0; i < g.node_count(); ++i)
        g.node_state(i, &coords[static_cast<size_t>(i) * n]);
    return coords;
}

void check_problem_shapes(const ControlProblem& p, const StateGrid& states,
                          const InputGrid& inputs) {
    if (states.dim() != p.state_dim)
        throw ConfigError("state grid dimension does not match problem " + p.name);
    if (inputs.dim() != p.input_dim)
        throw ConfigError("input grid dimension does not match problem " + p.name);
}

} // namespace

void bellman_backup(const ControlProblem& p, const StateGrid& states, const InputGrid& inputs,
                    const ValueTable& prev, const BackupOptions& opts, ValueTable& next,
                    std::vector<std::int32_t>& policy, SweepStats& stats) {
    check_problem_shapes(p, states, inputs);
    if (!prev.grid.same_layout(states))
        throw ConfigError("prev table grid does not match the state grid");
    if (opts.workers < 1)
        throw ConfigError("workers must be >= 1");

    const std::int64_t n_nodes = states.node_count();
    const std::int64_t n_inputs = inputs.node_count();
    const int sd = states.dim();
    const int id = inputs.dim();

    next.grid = states;
    next.interp = opts.interp;
    next.values.resize(static_cast<size_t>(n_nodes));
    policy.resize(static_cast<size_t>(n_nodes));

    const std::vector<double> xs = node_coordinates(states);
    const std::vector<double> us = node_coordinates(inputs);

    // Inputs on the grid must be admissible for the problem; quantization
    // may only restrict the input set, never extend it.
    for (std::int64_t j = 0; j < n_inputs; ++j)
        if (!p.input_set.contains(&us[static_cast<size_t>(j) * id], id))
            throw ConfigError("input grid contains a node outside the admissible input set");

    // Snapping reads the nearest node, which is what a NearestNeighbor plan
    // computes; interpolation mode only matters for non-snapped reads.
    const InterpPlan plan(states, opts.snap_successors ? InterpMode::NearestNeighbor : opts.interp);
    const double* prev_vals = prev.values.data();
    const double inf = std::numeric_limits<double>::infinity();

    struct WorkerOut {
        std::int64_t clamped = 0;
        double min_v = std::numeric_limits<double>::infinity();
        double max_v = -std::numeric_limits<double>::infinity();
        std::exception_ptr error;
    };
    std::vector<WorkerOut> outs(static_cast<size_t>(opts.workers));

    auto run_range = [&](std::int64_t begin, std::int64_t end, WorkerOut& out) {
        try {
            double xnext[kMaxDim];
            for (std::int64_t i = begin; i < end; ++i) {
                const double* x = &xs[static_cast<size_t>(i) * sd];
                double best = inf;
                std::int32_t best_j = -1;
                for (std::int64_t j = 0; j < n_inputs; ++j) {
                    const double* u = &us[static_cast<size_t>(j) * id];
                    p.dynamics(x, u, xnext);
                    bool clamped = false;
                    const double q =
                        p.stage_cost(x, u) + plan.eval(prev_vals, xnext, &clamped);
                    if (!std::isfinite(q))
                        throw NumericError("non-finite backup value at node " +
                                           std::to_string(i) + ", input " + std::to_string(j));
                    out.clamped += clamped;
                    if (q < best) {
                        best = q;
                        best_j = static_cast<std::int32_t>(j);
                    }
                }
                next.values[static_cast<size_t>(i)] = best;
                policy[static_cast<size_t>(i)] = best_j;
                out.min_v = std::min(out.min_v, best);
                out.max_v = std::max(out.max_v, best);
            }
        } catch (...) {
            out.error = std::current_exception();
        }
    };

    if (opts.workers == 1) {
        run_range(0, n_nodes, outs[0]);
    } else {
        std::vector<std::thread> threads;
        const std::int64_t chunk = (n_nodes + opts.workers - 1) / opts.workers;
        for (int w = 0; w < opts.workers; ++w) {
            const std::int64_t begin = std::min<std::int64_t>(w * chunk, n_nodes);
            const std::int64_t end = std::min<std::int64_t>(begin + chunk, n_nodes);
            threads.emplace_back(run_range, begin, end, std::ref(outs[static_cast<size_t>(w)]));
        }
        for (auto& t : threads)
            t.join();
    }

    stats = SweepStats{};
    stats.min_value = inf;
    stats.max_value = -inf;
    for (const auto& out : outs) {
        if (out.error)
            std::rethrow_exception(out.error);
        stats.clamped_pairs += out.clamped;
        stats.min_value = std::min(stats.min_value, out.min_v);
        stats.max_value = std::max(stats.max_value, out.max_v);
    }
}

StopCheck stop_satisfied(const std::vector<double>& gap, const std::vector<double>& sigma_nodes,
                         const StateGrid& states, const StoppingCriterion& criterion,
                         double delta) {
    if (gap.size() != static_cast<size_t>(states.node_count()) || gap.size() != sigma_nodes.size())
        throw DomainError("stop_satisfied: table sizes do not match the grid");
    StopCheck check;
    check.satisfied = true;
    double worst = -std::numeric_limits<double>::infinity();
    const int n = states.dim();
    double x[kMaxDim];
    for (std::int64_t i = 0; i < states.node_count(); ++i) {
        const double s = sigma_nodes[static_cast<size_t>(i)];
        if (s > delta)
            continue;
        const double g = gap[static_cast<size_t>(i)];
        states.node_state(i, x);
        const double c = criterion.evaluate(x, n, s);
        const double excess = g - c;
        if (excess > 0.0)
            check.satisfied = false;
        if (excess > worst) {
            worst = excess;
            check.worst_node = i;
            check.worst_excess = excess;
        }
        check.max_gap = std::max(check.max_gap, g);
    }
    return check;
}

ViRun run_until_stop(const ControlProblem& p, const StateGrid& states, const InputGrid& inputs,
                     const StoppingCriterion& criterion, const RunOptions& opts) {
    check_problem_shapes(p, states, inputs);
    if (criterion.kind == CriterionKind::QuadraticForm && criterion.matrix_dim != p.state_dim)
        throw ConfigError("quadratic criterion matrix dimension does not match the problem");
    if (opts.d_max < 0)
        throw ConfigError("d_max must be >= 0");

    ViRun run;
    run.states = states;
    run.inputs = inputs;
    run.criterion = criterion;
    run.backup = BackupOptions{opts.interp, opts.snap_successors, opts.workers};

    const std::int64_t n_nodes = states.node_count();
    run.sigma_nodes.resize(static_cast<size_t>(n_nodes));
    {
        double x[kMaxDim];
        double max_sigma = 0.0;
        for (std::int64_t i = 0; i < n_nodes; ++i) {
            states.node_state(i, x);
            const double s = p.measure(x);
            if (!(s >= 0.0) || !std::isfinite(s))
                throw NumericError("measure is negative or non-finite at node " +
                                   std::to_string(i));
            run.sigma_nodes[static_cast<size_t>(i)] = s;
            max_sigma = std::max(max_sigma, s);
        }
        run.delta = opts.delta.value_or(max_sigma);
        if (!(run.delta >= 0.0))
            throw ConfigError("delta must be nonnegative");
    }

    run.v_prev = make_zero_table(states, opts.interp); // V_{-1} = 0
    run.v_curr = make_zero_table(states, opts.interp);
    run.gap.assign(static_cast<size_t>(n_nodes), 0.0);

    for (int d = 0;; ++d) {
        const auto t0 = std::chrono::steady_clock::now();
        SweepStats stats;
        ValueTable next;
        std::vector<std::int32_t> policy;
        bellman_backup(p, states, inputs, d == 0 ? run.v_prev : run.v_curr, run.backup, next,
                       policy, stats);

        const ValueTable& prev = d == 0 ? run.v_prev : run.v_curr;
        for (std::int64_t i = 0; i < n_nodes; ++i) {
            const double g =
                next.values[static_cast<size_t>(i)] - prev.values[static_cast<size_t>(i)];
            // Interpolation with convex weights keeps backups monotone even
            // in floating point; a negative gap is a real defect.
            if (g < 0.0)
                throw NumericError("value table decreased at node " + std::to_string(i) +
                                   " in sweep " + std::to_string(d));
            run.gap[static_cast<size_t>(i)] = g;
        }

        const StopCheck check =
            stop_satisfied(run.gap, run.sigma_nodes, states, criterion, run.delta);

        if (d > 0)
            run.v_prev = std::move(run.v_curr);
        run.v_curr = std::move(next);
        run.policy = std::move(policy);
        run.d = d;
        run.stopped = check.satisfied;
        if (opts.keep_history)
            run.history.push_back(run.v_curr);

        IterationRecord rec;
        rec.d = d;
        rec.max_gap = check.max_gap;
        rec.worst_node = check.worst_node;
        rec.worst_excess = check.worst_excess;
        rec.clamped_pairs = stats.clamped_pairs;
        rec.satisfied = check.satisfied;
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        run.iterations.push_back(rec);
        if (opts.on_iteration)
            opts.on_iteration(rec);

        if (check.satisfied || d >= opts.d_max)
            break;
    }
    return run;
}

TerminalGapRecord terminal_stage_gap(const ControlProblem& p, const ViRun& run,
                                     std::int64_t node) {
    if (run.d < 0)
        throw DomainError("terminal_stage_gap needs a run with at least one backup");
    if (node < 0 || node >= run.states.node_count())
        throw DomainError("terminal_stage_gap: node out of range");
    TerminalGapRecord rec;
    rec.gap = run.gap[static_cast<size_t>(node)];
    double x[kMaxDim];
    run.states.node_state(node, x);
    rec.c_stop =
        run.criterion.evaluate(x, run.states.dim(), run.sigma_nodes[static_cast<size_t>(node)]);
    rec.sigma_bound = inverse_evaluate(p.alpha_w, rec.c_stop);
    return rec;
}

double snapped_enumeration_value(const ControlProblem& p, const StateGrid& states,
                                 const InputGrid& inputs, std::int64_t node, int depth) {
    if (node < 0 || node >= states.node_count())
        throw DomainError("snapped_enumeration_value: node out of range");
    if (depth < 0)
        throw DomainError("snapped_enumeration_value: depth must be >= 0");

    const std::int64_t n_in = inputs.node_count();
    std::vector<std::vector<double>> in_coords(static_cast<size_t>(n_in),
                                               std::vector<double>(inputs.dim()));
    for (std::int64_t j = 0; j < n_in; ++j)
        inputs.node_state(j, in_coords[static_cast<size_t>(j)].data());

    std::function<double(std::int64_t, int)> best = [&](std::int64_t at, int k) -> double {
        double x[kMaxDim];
        states.node_state(at, x);
        double lowest = std::numeric_limits<double>::infinity();
        double next[kMaxDim];
        for (std::int64_t j = 0; j < n_in; ++j) {
            const double* u = in_coords[static_cast<size_t>(j)].data();
            double q = p.stage_cost(x, u);
            if (k > 0) {
                p.dynamics(x, u, next);
                q += best(states.nearest_node(next), k - 1);
            }
            if (q < lowest) lowest = q;
        }
        return lowest;
    };
    return best(node, depth);
}

} // namespace vicert
