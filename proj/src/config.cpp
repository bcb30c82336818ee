#include "vicert/config.hpp"

#include <fstream>

#include "vicert/errors.hpp"

namespace vicert {

namespace {

nlohmann::json axes_to_json(const std::vector<AxisSpec>& axes) {
    nlohmann::json bounds = nlohmann::json::array();
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& a : axes) {
        bounds.push_back({a.lower, a.upper});
        counts.push_back(a.count);
    }
    return nlohmann::json{{"bounds", std::move(bounds)}, {"counts", std::move(counts)}};
}

std::vector<AxisSpec> axes_from_json(const nlohmann::json& j, const char* what) {
    const auto& bounds = j.at("bounds");
    const auto& counts = j.at("counts");
    if (bounds.size() != counts.size() || bounds.empty())
        throw ConfigError(std::string(what) + ": bounds and counts must align and be nonempty");
    std::vector<AxisSpec> axes;
    for (size_t i = 0; i < bounds.size(); ++i) {
        AxisSpec a;
        a.lower = bounds[i].at(0).get<double>();
        a.upper = bounds[i].at(1).get<double>();
        a.count = counts[i].get<int>();
        axes.push_back(a);
    }
    return axes;
}

} // namespace

ControlProblem RunConfig::make_problem() const {
    return problem_from_json(problem);
}

StateGrid RunConfig::make_state_grid() const {
    return StateGrid(state_axes);
}

InputGrid RunConfig::make_input_grid() const {
    return InputGrid(input_axes);
}

RunOptions RunConfig::make_run_options() const {
    RunOptions opts;
    opts.delta = delta;
    opts.d_max = d_max;
    opts.workers = workers;
    opts.interp = interp_mode_from_name(interp);
    opts.snap_successors = snap_successors;
    return opts;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["problem"] = problem;
    j["state_grid"] = axes_to_json(state_axes);
    j["input_grid"] = axes_to_json(input_axes);
    j["criterion"] = stop.to_json();
    if (delta)
        j["delta"] = *delta;
    j["d_max"] = d_max;
    j["interp"] = interp;
    j["snap_successors"] = snap_successors;
    j["workers"] = workers;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["export_csv"] = export_csv;
    if (simulate) {
        j["simulate"] = {{"x0", simulate->x0},
                         {"steps", simulate->steps},
                         {"lookahead", simulate->lookahead}};
    }
    if (certify) {
        j["certify"] = {{"horizon_target", certify->horizon_target},
                        {"delta_practical", certify->delta_practical},
                        {"lyapunov", certify->lyapunov},
                        {"long_margin", certify->long_margin},
                        {"require_exponential", certify->require_exponential},
                        {"require_semiglobal", certify->require_semiglobal}};
    }
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    try {
        RunConfig c;
        c.schema_version = j.at("schema_version").get<int>();
        if (c.schema_version != 1)
            throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
        c.problem = j.at("problem");
        (void)problem_from_json(c.problem); // validate eagerly
        c.state_axes = axes_from_json(j.at("state_grid"), "state_grid");
        c.input_axes = axes_from_json(j.at("input_grid"), "input_grid");
        (void)StateGrid(c.state_axes); // validate
        (void)InputGrid(c.input_axes);
        c.stop = StoppingCriterion::from_json(j.at("criterion"));
        if (j.contains("delta"))
            c.delta = j.at("delta").get<double>();
        if (j.contains("d_max"))
            c.d_max = j.at("d_max").get<int>();
        if (c.d_max < 0)
            throw ConfigError("d_max must be >= 0");
        if (j.contains("interp"))
            c.interp = j.at("interp").get<std::string>();
        (void)interp_mode_from_name(c.interp); // validate
        if (j.contains("snap_successors"))
            c.snap_successors = j.at("snap_successors").get<bool>();
        if (j.contains("workers"))
            c.workers = j.at("workers").get<int>();
        if (c.workers < 1)
            throw ConfigError("workers must be >= 1");
        if (j.contains("seed"))
            c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("out_dir"))
            c.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("export_csv"))
            c.export_csv = j.at("export_csv").get<bool>();
        if (j.contains("simulate")) {
            SimulateConfig s;
            s.x0 = j.at("simulate").at("x0").get<std::vector<double>>();
            if (j.at("simulate").contains("steps"))
                s.steps = j.at("simulate").at("steps").get<int>();
            if (s.steps < 0)
                throw ConfigError("simulate.steps must be >= 0");
            if (j.at("simulate").contains("lookahead"))
                s.lookahead = j.at("simulate").at("lookahead").get<std::string>();
            if (s.lookahead != "exact_state" && s.lookahead != "nearest_node")
                throw ConfigError("simulate.lookahead must be exact_state or nearest_node");
            c.simulate = std::move(s);
        }
        if (j.contains("certify")) {
            CertifyConfig cc;
            const auto& cj = j.at("certify");
            if (cj.contains("horizon_target"))
                cc.horizon_target = cj.at("horizon_target").get<double>();
            if (cj.contains("delta_practical"))
                cc.delta_practical = cj.at("delta_practical").get<double>();
            if (cj.contains("lyapunov"))
                cc.lyapunov = cj.at("lyapunov").get<bool>();
            if (cj.contains("long_margin"))
                cc.long_margin = cj.at("long_margin").get<int>();
            if (cj.contains("require_exponential"))
                cc.require_exponential = cj.at("require_exponential").get<bool>();
            if (cj.contains("require_semiglobal"))
                cc.require_semiglobal = cj.at("require_semiglobal").get<bool>();
            c.certify = cc;
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed run config: ") + e.what());
    }
}

bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.to_json() == b.to_json();
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return RunConfig::from_json(j);
}

void save_config(const std::string& path, const RunConfig& c) {
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw ConfigError("cannot open " + path + " for writing");
    os << c.to_json().dump(2) << "\n";
}

RunConfig benchmark_config(const std::string& scale, const StoppingCriterion& stop) {
    RunConfig c;
    c.problem = cubic_integrator_json();
    c.stop = stop;
    // Axis counts are odd so the state grid carries an exact origin node and
    // the input grid an exact zero input. With even counts the cheapest node
    // still has a positive stage cost, every sweep keeps adding at least that
    // much somewhere, and tight stopping rules can never fire: on the
    // 340-per-axis variant of the full grid the max gap provably floors at
    // sigma of the best node, 2.9499, forever.
    if (scale == "full") {
        c.state_axes = {{-10.0, 10.0, 341}, {-1000.0, 1000.0, 341}};
        c.input_axes = {{-20.0, 20.0, 909}};
    } else if (scale == "smoke") {
        // Input spacing (0.2) divides the x1 node spacing (0.2). Reachable
        // x1 sums are multiples of the input spacing, so with a coarser
        // input grid the odd x1 nodes can never be steered onto the origin
        // and tight relative criteria contract too slowly to fire.
        c.state_axes = {{-10.0, 10.0, 101}, {-1000.0, 1000.0, 101}};
        c.input_axes = {{-20.0, 20.0, 201}};
    } else {
        throw ConfigError("scale must be full or smoke, got " + scale);
    }
    c.simulate = SimulateConfig{{10.0, -1000.0}, 40, "exact_state"};
    return c;
}

} // namespace vicert
