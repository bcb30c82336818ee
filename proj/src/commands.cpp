#include "vicert/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vicert/certificates.hpp"
#include "vicert/errors.hpp"
#include "vicert/fmt.hpp"
#include "vicert/reproduce.hpp"
#include "vicert/simulate.hpp"

namespace fs = std::filesystem;

namespace vicert {

namespace {

// wall_ms stays out on purpose: run artifacts must be byte-stable across
// hosts, timings go to the log stream only.
nlohmann::json iteration_to_json(const IterationRecord& r) {
    return {{"d", r.d},
            {"max_gap", r.max_gap},
            {"worst_node", r.worst_node},
            {"worst_excess", r.worst_excess},
            {"clamped_pairs", r.clamped_pairs},
            {"satisfied", r.satisfied}};
}

const char* floor_kind_label(FloorKind k) {
    switch (k) {
    case FloorKind::Constant: return "constant";
    case FloorKind::Linear: return "linear";
    case FloorKind::Unspecified: return "unspecified";
    }
    return "unspecified";
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
    f << j.dump(2) << '\n';
}

LookaheadMode lookahead_from_name(const std::string& name) {
    if (name == "exact_state") return LookaheadMode::ExactState;
    if (name == "nearest_node") return LookaheadMode::NearestNodePolicy;
    throw ConfigError("unknown lookahead mode \"" + name +
                      "\" (expected exact_state or nearest_node)");
}

struct LoadedRun {
    RunConfig config; // the config the artifacts were solved under
    ControlProblem problem;
    ViRun run;
};

// Rebuilds a ViRun from the artifact directory a solve left behind. Grid
// layouts are cross-checked against the stored config so stale or foreign
// artifact mixes fail loudly instead of certifying the wrong run.
LoadedRun load_run(const std::string& out_dir) {
    const fs::path dir(out_dir);
    const fs::path mpath = dir / "manifest.json";
    std::ifstream f(mpath);
    if (!f)
        throw ConfigError("cannot read " + mpath.string() + "; run solve first");
    nlohmann::json manifest;
    try {
        f >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(mpath.string() + " is not valid JSON: " + e.what());
    }

    LoadedRun lr;
    try {
        lr.config = RunConfig::from_json(manifest.at("config"));
        const nlohmann::json& res = manifest.at("result");
        lr.run.d = res.at("d").get<int>();
        lr.run.stopped = res.at("stopped").get<bool>();
        lr.run.delta = res.at("delta").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(mpath.string() + ": " + e.what());
    }

    lr.problem = lr.config.make_problem();
    lr.run.states = lr.config.make_state_grid();
    lr.run.inputs = lr.config.make_input_grid();
    lr.run.criterion = lr.config.stop;
    lr.run.backup.interp = interp_mode_from_name(lr.config.interp);
    lr.run.backup.snap_successors = lr.config.snap_successors;
    lr.run.backup.workers = lr.config.workers;

    lr.run.v_curr = load_value_table((dir / "value_table.bin").string());
    lr.run.v_prev = load_value_table((dir / "value_prev.bin").string());
    if (!lr.run.v_curr.grid.same_layout(lr.run.states) ||
        !lr.run.v_prev.grid.same_layout(lr.run.states))
        throw ConfigError("value tables in " + out_dir +
                          " do not match the configured state grid; stale artifacts?");
    auto [pgrid, pol] = load_policy_table((dir / "policy.bin").string());
    if (!pgrid.same_layout(lr.run.states))
        throw ConfigError("policy table in " + out_dir + " does not match the state grid");
    lr.run.policy = std::move(pol);

    const std::int64_t n = lr.run.states.node_count();
    lr.run.gap.resize(static_cast<size_t>(n));
    lr.run.sigma_nodes.resize(static_cast<size_t>(n));
    double x[kMaxDim];
    for (std::int64_t i = 0; i < n; ++i) {
        lr.run.states.node_state(i, x);
        lr.run.sigma_nodes[static_cast<size_t>(i)] = lr.problem.measure(x);
        const double g = lr.run.v_curr.values[static_cast<size_t>(i)] -
                         lr.run.v_prev.values[static_cast<size_t>(i)];
        if (g < 0.0)
            throw NumericError("stored value tables violate monotonicity at node " +
                               std::to_string(i));
        lr.run.gap[static_cast<size_t>(i)] = g;
    }
    return lr;
}

std::string vec_to_string(const std::vector<double>& v) {
    std::string s = "(";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += fmt_double(v[i]);
    }
    return s + ")";
}

} // namespace

int cmd_solve(const RunConfig& config, std::ostream& log) {
    const ControlProblem p = config.make_problem();
    const StateGrid states = config.make_state_grid();
    const InputGrid inputs = config.make_input_grid();

    RunOptions opts = config.make_run_options();
    opts.on_iteration = [&log](const IterationRecord& r) {
        log << "sweep " << r.d << ": max_gap " << fmt_double(r.max_gap) << ", clamped "
            << r.clamped_pairs << (r.satisfied ? ", stop rule met" : "") << " ("
            << fmt_double(r.wall_ms) << " ms)\n";
    };

    const ViRun run = run_until_stop(p, states, inputs, config.stop, opts);

    fs::create_directories(config.out_dir);
    const fs::path dir(config.out_dir);
    save_value_table((dir / "value_table.bin").string(), run.v_curr);
    save_value_table((dir / "value_prev.bin").string(), run.v_prev);
    save_policy_table((dir / "policy.bin").string(), states, run.policy);
    {
        std::ofstream jf(dir / "iterations.jsonl", std::ios::trunc);
        if (!jf)
            throw ConfigError("cannot open " + (dir / "iterations.jsonl").string() +
                              " for writing");
        for (const IterationRecord& r : run.iterations)
            jf << iteration_to_json(r).dump() << '\n';
    }

    double vmin = 0.0, vmax = 0.0;
    if (!run.v_curr.values.empty()) {
        const auto [lo, hi] =
            std::minmax_element(run.v_curr.values.begin(), run.v_curr.values.end());
        vmin = *lo;
        vmax = *hi;
    }
    std::int64_t clamped_total = 0;
    for (const IterationRecord& r : run.iterations) clamped_total += r.clamped_pairs;

    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    manifest["config"] = config.to_json();
    nlohmann::json& res = manifest["result"];
    res["d"] = run.d;
    res["stopped"] = run.stopped;
    res["delta"] = run.delta;
    res["sweeps"] = run.d + 1;
    res["clamped_pairs_total"] = clamped_total;
    res["value_min"] = vmin;
    res["value_max"] = vmax;
    if (!run.iterations.empty()) {
        res["final_max_gap"] = run.iterations.back().max_gap;
        res["worst_node"] = run.iterations.back().worst_node;
        res["worst_excess"] = run.iterations.back().worst_excess;
    }
    const FloorInfo fl = config.stop.floor_info(run.delta);
    res["floor"] = {{"kind", floor_kind_label(fl.kind)}, {"note", fl.note}};
    if (fl.epsilon_lower) res["floor"]["epsilon_lower"] = *fl.epsilon_lower;
    manifest["artifacts"] = {{"value_table", "value_table.bin"},
                             {"value_prev", "value_prev.bin"},
                             {"policy", "policy.bin"},
                             {"iterations", "iterations.jsonl"}};
    write_json_file(dir / "manifest.json", manifest);

    if (config.export_csv) {
        export_table_csv((dir / "value_table.csv").string(), run.v_curr);
        export_policy_csv((dir / "policy.csv").string(), states, run.policy, inputs);
    }

    if (run.stopped) {
        log << "stop rule met after d = " << run.d << " backups (delta "
            << fmt_double(run.delta) << "); artifacts in " << config.out_dir << "\n";
        return kExitOk;
    }
    log << "stop rule NOT met within d_max = " << config.d_max
        << " backups; partial artifacts in " << config.out_dir << "\n";
    return kExitNotTerminated;
}

int cmd_certify(const RunConfig& config, std::ostream& log) {
    LoadedRun lr = load_run(config.out_dir);
    const CertifyConfig cc = config.certify.value_or(CertifyConfig{});

    CertifyOptions copts;
    copts.horizon_target = cc.horizon_target;
    copts.delta_practical = cc.delta_practical;
    const CertificateReport rep = build_certificate_report(lr.problem, lr.run, copts);
    nlohmann::json cert = rep.to_json();

    int rc = kExitOk;

    if (cc.lyapunov) {
        const SimulateConfig* sim = config.simulate ? &*config.simulate
                                 : lr.config.simulate ? &*lr.config.simulate
                                                      : nullptr;
        if (!sim)
            throw ConfigError("the lyapunov audit needs a simulate section for its rollout");

        RunOptions lopts = lr.config.make_run_options();
        lopts.delta = lr.run.delta;
        lopts.d_max = lr.run.d + cc.long_margin;
        lopts.on_iteration = [&log](const IterationRecord& r) {
            log << "audit sweep " << r.d << ": max_gap " << fmt_double(r.max_gap) << " ("
                << fmt_double(r.wall_ms) << " ms)\n";
        };
        // eps = 0 never fires short of exact convergence, so this runs the
        // full d + long_margin sweeps (or stops because V is already exact).
        const ViRun long_run = run_until_stop(lr.problem, lr.run.states, lr.run.inputs,
                                              uniform_criterion(0.0), lopts);
        const int margin_eff = long_run.d - lr.run.d;

        const SandwichCheck sw = sandwich_check(lr.problem, lr.run, long_run, margin_eff);
        cert["sandwich"] = {{"d_long", long_run.d},
                            {"a_v_hat", sw.a_v_hat},
                            {"dominance_ok", sw.dominance_ok},
                            {"violations", sw.violations},
                            {"max_excess", sw.max_excess}};

        SimulateOptions sopts;
        sopts.mode = lookahead_from_name(sim->lookahead);
        sopts.snap_successors = lr.config.snap_successors;
        const Trajectory traj = closed_loop(lr.problem, lr.run.v_prev, lr.run.inputs, sim->x0,
                                            sim->steps, sopts, &lr.run.policy);
        const LyapunovReport lyap =
            lyapunov_decrease_check(lr.problem, lr.run, long_run, traj.states, margin_eff);
        nlohmann::json terms = nlohmann::json::array();
        for (const LyapunovTerm& t : lyap.terms)
            terms.push_back({{"k", t.k},
                             {"y_next", t.y_next},
                             {"y_curr", t.y_curr},
                             {"alpha_w_sigma", t.alpha_w_sigma},
                             {"v_eps", t.v_eps},
                             {"proxy_error", t.proxy_error},
                             {"interp_slack", t.interp_slack},
                             {"slack", t.slack}});
        cert["lyapunov"] = {{"d_long", lyap.d_long},
                            {"violations", lyap.violations},
                            {"terms", std::move(terms)}};

        log << "sandwich audit: a_v_hat " << fmt_double(sw.a_v_hat) << ", violations "
            << sw.violations << "\n";
        log << "lyapunov audit: " << lyap.terms.size() << " steps, violations "
            << lyap.violations << "\n";
        if (sw.violations > 0 || lyap.violations > 0) rc = kExitPropertyFailure;
    }

    write_json_file(fs::path(config.out_dir) / "certificate.json", cert);
    log << "near-optimality bound v_eps: max " << fmt_double(rep.v_eps_max) << ", mean "
        << fmt_double(rep.v_eps_mean) << "\n";
    if (rep.exponential_applicable)
        log << "exponential certificate: decay base " << fmt_double(*rep.decay_base_value)
            << ", running-cost gap " << fmt_double(*rep.running_cost_gap_value) << "\n";
    else
        log << "exponential certificate: not applicable (" << rep.exponential_reason << ")\n";
    if (rep.semiglobal_attempted) {
        if (rep.eps_star_semiglobal_value)
            log << "semiglobal threshold eps* = " << fmt_double(*rep.eps_star_semiglobal_value)
                << "\n";
        else
            log << "semiglobal threshold: no certificate on this region\n";
    }

    if (rc == kExitOk && cc.require_exponential && !rep.exponential_applicable) {
        log << "required exponential certificate is unavailable\n";
        rc = kExitCertificateUnavailable;
    }
    if (rc == kExitOk && cc.require_semiglobal &&
        (!rep.semiglobal_attempted || rep.semiglobal_no_certificate ||
         !rep.eps_star_semiglobal_value)) {
        log << "required semiglobal certificate is unavailable\n";
        rc = kExitCertificateUnavailable;
    }
    log << "certificate written to " << (fs::path(config.out_dir) / "certificate.json").string()
        << "\n";
    return rc;
}

int cmd_simulate(const RunConfig& config, std::ostream& log) {
    LoadedRun lr = load_run(config.out_dir);
    const SimulateConfig* sim = config.simulate ? &*config.simulate
                             : lr.config.simulate ? &*lr.config.simulate
                                                  : nullptr;
    if (!sim)
        throw ConfigError("no simulate section in the config or the solved manifest");
    if (static_cast<int>(sim->x0.size()) != lr.run.states.dim())
        throw ConfigError("x0 has " + std::to_string(sim->x0.size()) + " coordinates, state is " +
                          std::to_string(lr.run.states.dim()) + "-dimensional");

    SimulateOptions sopts;
    sopts.mode = lookahead_from_name(sim->lookahead);
    sopts.snap_successors = lr.config.snap_successors;
    const Trajectory traj = closed_loop(lr.problem, lr.run.v_prev, lr.run.inputs, sim->x0,
                                        sim->steps, sopts, &lr.run.policy);

    EnvelopeCheck env;
    if (lr.run.stopped) {
        env = envelope_check(lr.problem, lr.run, traj);
    } else {
        env.refusal_reason = "run did not terminate, so there is no certificate to project";
        env.delta_practical =
            *std::max_element(traj.sigma_values.begin(), traj.sigma_values.end());
    }

    const fs::path dir(config.out_dir);
    fs::create_directories(dir);
    export_trajectory_csv((dir / "trajectory.csv").string(), traj,
                          env.exponential_claimed ? &env.envelope : nullptr);

    nlohmann::json summary;
    summary["x0"] = sim->x0;
    summary["steps"] = sim->steps;
    summary["lookahead"] = sim->lookahead;
    summary["running_cost"] = running_cost_estimate(traj);
    summary["sigma_final"] = traj.sigma_values.back();
    summary["saturated"] = traj.saturated;
    summary["envelope"] = {{"claimed", env.exponential_claimed},
                           {"violations", env.violations},
                           {"max_ratio", env.max_ratio},
                           {"delta_practical", env.delta_practical}};
    if (!env.exponential_claimed) summary["envelope"]["refusal_reason"] = env.refusal_reason;
    write_json_file(dir / "simulation.json", summary);

    log << "rollout from " << vec_to_string(sim->x0) << ": running cost "
        << fmt_double(running_cost_estimate(traj)) << ", final sigma "
        << fmt_double(traj.sigma_values.back())
        << (traj.saturated ? " (lookahead clamped at the grid boundary)" : "") << "\n";
    if (env.exponential_claimed)
        log << "decay envelope: " << env.violations << " violation(s), max ratio "
            << fmt_double(env.max_ratio) << ", practical bound "
            << fmt_double(env.delta_practical) << "\n";
    else
        log << "decay envelope refused: " << env.refusal_reason << " (observed sigma peak "
            << fmt_double(env.delta_practical) << ")\n";

    return env.violations > 0 ? kExitPropertyFailure : kExitOk;
}

int cmd_reproduce(const std::string& which, const std::string& scale,
                  const std::string& out_dir, int workers, std::ostream& log) {
    if (which != "table1" && which != "table2" && which != "all")
        throw ConfigError("reproduce target must be table1, table2 or all, got \"" + which +
                          "\"");

    const ReproductionResult r =
        reproduce_benchmark(scale, workers, [&log](const IterationRecord& rec) {
            log << "sweep " << rec.d << ": max_gap " << fmt_double(rec.max_gap) << " ("
                << fmt_double(rec.wall_ms) << " ms)\n";
        });

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    if (which != "table2") {
        export_table1_csv((dir / "table1.csv").string(), r);
        int matched = 0, referenced = 0;
        for (const Table1Cell& c : r.table1) {
            log << c.kind << " eps " << fmt_double(c.eps) << ": d = " << c.d_computed;
            if (c.d_reference) {
                ++referenced;
                matched += c.match ? 1 : 0;
                log << " (reference " << *c.d_reference << (c.match ? ", match" : ", MISMATCH")
                    << ")";
            }
            log << "\n";
        }
        if (referenced > 0)
            log << "termination depths: " << matched << "/" << referenced
                << " match the published table\n";
    }
    if (which != "table1") {
        export_table2_csv((dir / "table2.csv").string(), r);
        for (const Table2Column& c : r.table2) {
            log << "d = " << c.d << ": running cost " << fmt_double(c.v_run) << ", sigma_40 "
                << fmt_double(c.sigma_final);
            if (c.v_run_reference)
                log << " (reference " << fmt_double(*c.v_run_reference) << " / "
                    << fmt_double(*c.sigma_reference) << ")";
            log << "\n";
        }
    }
    log << "benchmark tables written to " << out_dir << " (" << r.sweeps << " sweeps)\n";
    return kExitOk;
}

namespace {

// Node-snapped one-dimensional shift chain, all data dyadic so snapped
// backups and the brute-force oracle agree bit for bit.
ControlProblem make_shift_chain() {
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

} // namespace

int cmd_check(std::ostream& log, const std::string& inject) {
    if (!inject.empty() && inject != "stage-cost-sign")
        throw ConfigError("unknown inject target \"" + inject +
                          "\" (supported: stage-cost-sign)");

    int failures = 0;
    const auto report = [&](const char* name, bool ok, const std::string& detail) {
        if (ok) {
            log << "[ok] " << name << "\n";
        } else {
            ++failures;
            log << "[FAIL] " << name << ": " << detail << "\n";
        }
    };
    const auto guarded = [&](const char* name, const std::function<void()>& body) {
        try {
            body();
        } catch (const std::exception& e) {
            report(name, false, e.what());
        }
    };

    guarded("inverse_round_trip", [&] {
        std::vector<std::pair<std::string, MonotoneFn>> fns;
        fns.emplace_back("linear", MonotoneFn::linear(3.7));
        fns.emplace_back("power", MonotoneFn::power(2.0, 1.5));
        fns.emplace_back("compose",
                         MonotoneFn::compose(MonotoneFn::linear(2.0), MonotoneFn::power(1.0, 2.0)));
        fns.emplace_back("sum", MonotoneFn::sum({MonotoneFn::linear(1.0),
                                                 MonotoneFn::power(0.5, 3.0)}));
        fns.emplace_back("min", MonotoneFn::min_of({MonotoneFn::linear(4.0),
                                                    MonotoneFn::power(1.0, 0.5)}));
        fns.emplace_back("max", MonotoneFn::max_of({MonotoneFn::linear(0.25),
                                                    MonotoneFn::power(1.0, 2.0)}));
        fns.emplace_back("piecewise", MonotoneFn::piecewise_linear({{0.0, 0.0},
                                                                    {1.0, 0.5},
                                                                    {3.0, 4.0}}));
        fns.emplace_back("shifted", MonotoneFn::shifted_identity_minus(
                                        MonotoneFn::scale(0.5, MonotoneFn::identity())));
        fns.emplace_back("inverse", MonotoneFn::inverse(MonotoneFn::power(1.0, 3.0)));

        std::int64_t bad = 0;
        std::string first;
        for (const auto& [fname, fn] : fns) {
            for (int i = 0; i < 100; ++i) {
                const double s = std::pow(10.0, -8.0 + 14.0 * i / 99.0);
                const double y = fn.evaluate(s);
                const double s2 = inverse_evaluate(fn, y);
                const double tol = 10.0 * kInverseTolDefault * std::max(1.0, s);
                if (std::fabs(s2 - s) > tol) {
                    ++bad;
                    if (first.empty())
                        first = fname + " at s = " + fmt_double(s) + " came back as " +
                                fmt_double(s2);
                }
            }
        }
        report("inverse_round_trip", bad == 0,
               std::to_string(bad) + " round trips off (" + first + ")");
    });

    guarded("interp_node_exact", [&] {
        const RectGrid g(std::vector<AxisSpec>{{-1.0, 1.0, 7}, {0.0, 3.0, 5}});
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> val(0.0, 10.0);
        ValueTable t{g, {}, InterpMode::Multilinear};
        t.values.resize(static_cast<size_t>(g.node_count()));
        for (double& v : t.values) v = val(rng);

        std::int64_t bad = 0;
        double x[kMaxDim];
        for (std::int64_t i = 0; i < g.node_count(); ++i) {
            g.node_state(i, x);
            if (value_at(t, x) != t.values[static_cast<size_t>(i)]) ++bad;
        }

        // Lifting every node value must lift every interpolated read.
        ValueTable hi = t;
        std::uniform_real_distribution<double> lift(0.1, 1.0);
        for (double& v : hi.values) v += lift(rng);
        std::uniform_real_distribution<double> qx(-1.3, 1.3), qy(-0.5, 3.5);
        for (int i = 0; i < 200; ++i) {
            const double q[2] = {qx(rng), qy(rng)};
            if (value_at(hi, q) < value_at(t, q)) ++bad;
        }
        report("interp_node_exact", bad == 0, std::to_string(bad) + " reads off");
    });

    guarded("backup_vs_enumeration", [&] {
        const ControlProblem p = make_shift_chain();
        const StateGrid sg(std::vector<AxisSpec>{{-1.0, 1.0, 5}});
        const InputGrid ig(std::vector<AxisSpec>{{-1.0, 1.0, 5}});
        BackupOptions bo;
        bo.snap_successors = true;

        std::int64_t bad = 0;
        ValueTable prev = make_zero_table(sg);
        std::vector<std::int32_t> policy;
        for (int d = 0; d <= 3; ++d) {
            ValueTable next = make_zero_table(sg);
            SweepStats stats;
            bellman_backup(p, sg, ig, prev, bo, next, policy, stats);
            for (std::int64_t i = 0; i < sg.node_count(); ++i)
                if (next.values[static_cast<size_t>(i)] !=
                    snapped_enumeration_value(p, sg, ig, i, d))
                    ++bad;
            prev = std::move(next);
        }
        report("backup_vs_enumeration", bad == 0,
               std::to_string(bad) + " (node, depth) pairs differ from brute force");
    });

    guarded("detectability_sampling", [&] {
        ControlProblem p = make_cubic_integrator();
        if (inject == "stage-cost-sign")
            p.stage_cost = [](const double* x, const double* u) {
                const double a1 = std::fabs(x[0]), a2 = std::fabs(x[1]), b = std::fabs(u[0]);
                return a1 * a1 * a1 + a2 - b * b * b;
            };
        SamplingSpec spec;
        spec.state_box = Box{{-10.0, -1000.0}, {10.0, 1000.0}};
        const Sa1Report rep = validate_sa1(p, spec);
        std::string detail;
        if (!rep.ok()) {
            const Sa1Violation& v = rep.violations.front();
            detail = std::to_string(rep.violations.size()) + " violation(s); first: " + v.check +
                     " at x = " + vec_to_string(v.x) + ", lhs " + fmt_double(v.lhs) + " > rhs " +
                     fmt_double(v.rhs);
        }
        report("detectability_sampling", rep.ok(), detail);
    });

    if (failures > 0) {
        log << failures << " property check(s) failed\n";
        return kExitPropertyFailure;
    }
    log << "all property checks passed\n";
    return kExitOk;
}

} // namespace vicert
