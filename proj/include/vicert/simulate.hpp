#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vicert/engine.hpp"

namespace vicert {

enum class LookaheadMode {
    // Re-minimize the one-step lookahead at the exact (generally off-grid)
    // current state. Matches how the backup defines the greedy policy.
    ExactState,
    // Use the tabulated argmin of the nearest node instead; cheaper, coarser.
    NearestNodePolicy,
};

struct SimulateOptions {
    LookaheadMode mode = LookaheadMode::ExactState;
    // Evolve the node-projected system instead of the true dynamics (the
    // finite chain that snapped backups solve exactly).
    bool snap_successors = false;
    // When set, ExactState lookahead treats inputs whose true successor has
    // sigma above this bound as inadmissible. Value tables only exist on the
    // grid box; without the guard a clamped read can make leaving the box
    // look free and the rollout diverges on converged tables. Falls back to
    // the unguarded argmin if no input qualifies.
    std::optional<double> admissible_measure_bound;
};

struct Trajectory {
    std::vector<std::vector<double>> states;  // length steps + 1
    std::vector<std::vector<double>> inputs;  // length steps
    std::vector<std::int32_t> input_indices;  // length steps
    std::vector<double> stage_costs;          // length steps
    std::vector<double> sigma_values;         // length steps + 1
    bool saturated = false; // some lookahead read was clamped to the grid box
};

// Closed-loop rollout of the greedy policy against v_prev (the V_{d-1} table
// of a stopped run): u_k = argmin_j [cost(x_k, u_j) + v_prev(f(x_k, u_j))],
// ties to the lowest input index. States follow the true dynamics and may
// leave the grid box; table reads clamp and set `saturated`.
// `policy` is only consulted in NearestNodePolicy mode and must then be the
// argmin table computed against the same v_prev.
Trajectory closed_loop(const ControlProblem& p, const ValueTable& v_prev,
                       const InputGrid& inputs, const std::vector<double>& x0, int steps,
                       const SimulateOptions& opts = {},
                       const std::vector<std::int32_t>* policy = nullptr);

// Sum of the recorded stage costs.
double running_cost_estimate(const Trajectory& t);

struct EnvelopeCheck {
    bool exponential_claimed = false;
    std::string refusal_reason;    // set when the exponential claim is refused
    std::vector<double> envelope;  // per step when claimed, empty otherwise
    std::int64_t violations = 0;   // steps with sigma > envelope + grid_slack
    double max_ratio = 0.0;        // max over steps of sigma / envelope
    // Smallest delta with sigma_k <= max(envelope_k, delta) for every k;
    // with a refused claim the envelope is treated as zero, so this is the
    // plain sigma peak.
    double delta_practical = 0.0;
};

// Compares measured sigma along the trajectory against the certified decay
// envelope of the run's criterion. Refuses the exponential claim (instead of
// faking one) when the criterion kind does not vanish with sigma, sector
// constants are missing, or eps is at or beyond the stability threshold.
EnvelopeCheck envelope_check(const ControlProblem& p, const ViRun& run, const Trajectory& t,
                             double grid_slack = 0.0);

// CSV with one row per step: k, state, input, stage cost, sigma, and the
// envelope column when one is supplied.
void export_trajectory_csv(const std::string& path, const Trajectory& t,
                           const std::vector<double>* envelope = nullptr);

} // namespace vicert
