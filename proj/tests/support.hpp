#pragma once

// Shared fixtures. The shift chain is built so every number the solver
// touches is dyadic: nodes at multiples of 0.5, costs in multiples of
// 0.0625, successors landing exactly on nodes. Snapped backups on it are
// exact in floating point, which lets tests assert with == instead of
// tolerances.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "vicert/engine.hpp"
#include "vicert/problem.hpp"

namespace vicert::testing {

inline ControlProblem shift_chain() {
    ControlProblem p;
    p.name = "shift_chain";
    p.state_dim = 1;
    p.input_dim = 1;
    p.dynamics = [](const double* x, const double* u, double* out) { out[0] = x[0] + u[0]; };
    p.stage_cost = [](const double* x, const double* u) {
        return std::fabs(x[0]) + 0.125 * std::fabs(u[0]);
    };
    p.measure = [](const double* x) { return std::fabs(x[0]); };
    p.input_set = Box{{-1.0}, {1.0}};
    p.alpha_v_bar = MonotoneFn::linear(14.0);
    p.alpha_w = MonotoneFn::identity();
    p.sector = SectorBounds{14.0, 1.0, std::numeric_limits<double>::infinity()};
    return p;
}

inline StateGrid chain_states() {
    return StateGrid(std::vector<AxisSpec>{{-1.0, 1.0, 5}});
}

inline InputGrid chain_inputs() {
    return InputGrid(std::vector<AxisSpec>{{-1.0, 1.0, 5}});
}

// Cubic-integrator instance small enough for the enumeration oracle. Nodes
// at x in {-2,-1,0,1,2}^2, inputs {-1,-0.5,0,0.5,1}; u^3 lands on multiples
// of 0.125, so snapped successors stay dyadic.
inline StateGrid cubic_states_small() {
    return StateGrid(std::vector<AxisSpec>{{-2.0, 2.0, 5}, {-2.0, 2.0, 5}});
}

inline InputGrid cubic_inputs_small() {
    return InputGrid(std::vector<AxisSpec>{{-1.0, 1.0, 5}});
}

inline RunOptions snapped_options(int d_max = 50) {
    RunOptions o;
    o.snap_successors = true;
    o.d_max = d_max;
    return o;
}

inline std::filesystem::path test_tmp_dir(const std::string& name) {
    std::filesystem::path dir(VICERT_TEST_TMP);
    dir /= name;
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream out;
    out << f.rdbuf();
    return out.str();
}

// Runs the CLI with the given arguments, capturing combined stdout/stderr.
// Returns the exit code, or -1 when the process died on a signal.
inline int run_cli(const std::string& args, std::string* captured = nullptr) {
    static int counter = 0;
    const std::filesystem::path log =
        test_tmp_dir("cli_logs") / ("run" + std::to_string(counter++) + ".log");
    const std::string cmd =
        std::string(VICERT_BIN_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (captured) *captured = read_file(log);
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

} // namespace vicert::testing
