#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "vicert/grid.hpp"
#include "vicert/problem.hpp"
#include "vicert/stopping.hpp"

namespace vicert {

struct BackupOptions {
    InterpMode interp = InterpMode::Multilinear;
    // Project successors onto the nearest node instead of interpolating.
    // Turns the backup into exact value iteration on a finite chain, which
    // the equality-based test oracles rely on.
    bool snap_successors = false;
    int workers = 1;
};

struct SweepStats {
    std::int64_t clamped_pairs = 0; // (node, input) pairs whose successor left the box
    double min_value = 0.0;
    double max_value = 0.0;
};

// One synchronous Bellman backup over all nodes:
//   next(x) = min_u [ cost(x, u) + prev(f(x, u)) ]
// with ties going to the lowest input index. The per-node input scan is
// sequential and identical for every worker count, so results are
// bit-identical no matter how the node range is split.
void bellman_backup(const ControlProblem& p, const StateGrid& states, const InputGrid& inputs,
                    const ValueTable& prev, const BackupOptions& opts, ValueTable& next,
                    std::vector<std::int32_t>& policy, SweepStats& stats);

struct StopCheck {
    bool satisfied = false;
    std::int64_t worst_node = -1; // argmax of gap - c over the region, -1 if region empty
    double worst_excess = 0.0;    // gap - c at that node
    double max_gap = 0.0;         // over the region
};

// Evaluates the per-node stop rule gap(x) <= c(eps, x) on the region
// {sigma(x) <= delta}.
StopCheck stop_satisfied(const std::vector<double>& gap, const std::vector<double>& sigma_nodes,
                         const StateGrid& states, const StoppingCriterion& criterion,
                         double delta);

struct IterationRecord {
    int d = 0;
    double max_gap = 0.0;
    std::int64_t worst_node = -1;
    double worst_excess = 0.0;
    std::int64_t clamped_pairs = 0;
    bool satisfied = false;
    double wall_ms = 0.0; // timing diagnostic; excluded from primary artifacts
};

struct RunOptions {
    std::optional<double> delta; // stop-region bound; defaults to max sigma over nodes
    int d_max = 200;
    int workers = 1;
    InterpMode interp = InterpMode::Multilinear;
    bool snap_successors = false;
    bool keep_history = false; // retain every V_d (small grids only)
    std::function<void(const IterationRecord&)> on_iteration;
};

struct ViRun {
    StateGrid states;
    InputGrid inputs;
    StoppingCriterion criterion;
    double delta = 0.0;
    int d = -1;           // index of the last completed backup
    bool stopped = false; // stop rule met at depth d (false: d_max exhausted)
    ValueTable v_prev;    // V_{d-1}
    ValueTable v_curr;    // V_d
    std::vector<double> gap; // V_d - V_{d-1}, always >= 0
    std::vector<double> sigma_nodes;
    std::vector<std::int32_t> policy; // argmin of the final backup
    std::vector<IterationRecord> iterations;
    std::vector<ValueTable> history; // V_0 .. V_d when keep_history was set
    BackupOptions backup;
};

// Runs backups d = 0, 1, ... from V_{-1} = 0, checking the stop rule after
// each completed sweep. Asserts pointwise monotonicity of the value tables
// every sweep; a violation means broken interpolation and raises
// NumericError rather than returning garbage.
ViRun run_until_stop(const ControlProblem& p, const StateGrid& states, const InputGrid& inputs,
                     const StoppingCriterion& criterion, const RunOptions& opts = {});

struct TerminalGapRecord {
    double gap = 0.0;
    double c_stop = 0.0;
    double sigma_bound = 0.0; // alpha_w^{-1}(c_stop): measure bound for the greedy endpoint
};

TerminalGapRecord terminal_stage_gap(const ControlProblem& p, const ViRun& run, std::int64_t node);

// Brute-force optimum over all input sequences of length depth+1 on the
// node-projected chain, accumulated tail-first exactly like the backup.
// Exponential in depth: a diagnostic oracle for tiny instances, nothing more.
double snapped_enumeration_value(const ControlProblem& p, const StateGrid& states,
                                 const InputGrid& inputs, std::int64_t node, int depth);

} // namespace vicert
