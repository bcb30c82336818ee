#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vicert/engine.hpp"
#include "vicert/grid.hpp"
#include "vicert/problem.hpp"
#include "vicert/stopping.hpp"

namespace vicert {

struct SimulateConfig {
    std::vector<double> x0;
    int steps = 40;
    std::string lookahead = "exact_state"; // or "nearest_node"
};

struct CertifyConfig {
    double horizon_target = 1.0;
    double delta_practical = 1.0;
    bool lyapunov = false; // deep-solve audit; needs a simulate section
    int long_margin = 20;
    bool require_exponential = false; // exit 4 when requested but unavailable
    bool require_semiglobal = false;
};

// Everything one run needs, round-trippable through JSON: parse(emit(c))
// produces an identical config and emit is byte-stable (keys are sorted,
// floats shortest-round-trip).
struct RunConfig {
    int schema_version = 1;
    nlohmann::json problem; // problem subtree, resolved lazily
    std::vector<AxisSpec> state_axes;
    std::vector<AxisSpec> input_axes;
    StoppingCriterion stop;
    std::optional<double> delta;
    int d_max = 200;
    std::string interp = "multilinear";
    bool snap_successors = false;
    int workers = 1;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    bool export_csv = false;
    std::optional<SimulateConfig> simulate;
    std::optional<CertifyConfig> certify;

    ControlProblem make_problem() const;
    StateGrid make_state_grid() const;
    InputGrid make_input_grid() const;
    RunOptions make_run_options() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

bool operator==(const RunConfig& a, const RunConfig& b); // via JSON forms

RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& c);

// The two benchmark setups used throughout: a 340x340 grid on
// [-10,10]x[-1000,1000] with 909 inputs on [-20,20], and a 100x100 / 101
// smoke variant of the same boxes.
RunConfig benchmark_config(const std::string& scale, const StoppingCriterion& stop);

} // namespace vicert
