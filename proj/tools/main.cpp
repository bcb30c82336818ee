#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vicert/commands.hpp"
#include "vicert/errors.hpp"

namespace {

struct SolveArgs {
    std::string config;
    std::string out;
    int workers = 0;
    std::string interp;
    bool csv = false;
};

struct CertifyArgs {
    std::string config;
    std::string out;
    int workers = 0;
    bool lyapunov = false;
    bool require_exponential = false;
    bool require_semiglobal = false;
    double horizon_target = 0.0;
    double delta_practical = 0.0;
    int long_margin = 0;
};

struct SimulateArgs {
    std::string config;
    std::string out;
    std::vector<double> x0;
    int steps = 0;
    std::string lookahead;
};

struct ReproduceArgs {
    std::string which = "all";
    std::string scale = "full";
    std::string out = "out";
    int workers = 1;
};

vicert::RunConfig base_config(const std::string& config_path, const std::string& out_override) {
    vicert::RunConfig cfg;
    if (!config_path.empty()) cfg = vicert::load_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"grid value iteration with state-dependent stopping and certificates"};
    app.require_subcommand(1);

    SolveArgs sa;
    CLI::App* solve = app.add_subcommand("solve", "run backups until the stop rule fires");
    solve->add_option("--config", sa.config, "run configuration (json)")->required();
    solve->add_option("--out", sa.out, "artifact directory (overrides the config)");
    solve->add_option("--workers", sa.workers, "worker threads (overrides the config)")
        ->check(CLI::PositiveNumber);
    solve->add_option("--interp", sa.interp, "multilinear or nearest (overrides the config)");
    solve->add_flag("--csv", sa.csv, "also export value and policy tables as csv");

    CertifyArgs ca;
    CLI::App* certify =
        app.add_subcommand("certify", "derive certificates from solved artifacts");
    certify->add_option("--config", ca.config, "run configuration (json)");
    certify->add_option("--out", ca.out, "artifact directory (overrides the config)");
    certify->add_option("--workers", ca.workers, "worker threads for the audit solve")
        ->check(CLI::PositiveNumber);
    certify->add_flag("--lyapunov", ca.lyapunov, "audit the certified decrease along a rollout");
    certify->add_flag("--require-exponential", ca.require_exponential,
                      "fail unless the exponential certificate applies");
    certify->add_flag("--require-semiglobal", ca.require_semiglobal,
                      "fail unless a semiglobal threshold is certified");
    CLI::Option* ht = certify->add_option("--horizon-target", ca.horizon_target,
                                          "gap level the conservative horizon must reach");
    CLI::Option* dp = certify->add_option("--delta-practical", ca.delta_practical,
                                          "practical ball for the semiglobal threshold");
    CLI::Option* lm = certify->add_option("--long-margin", ca.long_margin,
                                          "extra sweeps for the audit solve");

    SimulateArgs ma;
    CLI::App* simulate =
        app.add_subcommand("simulate", "roll out the greedy policy of a solved run");
    simulate->add_option("--config", ma.config, "run configuration (json)");
    simulate->add_option("--out", ma.out, "artifact directory (overrides the config)");
    CLI::Option* x0opt =
        simulate->add_option("--x0", ma.x0, "start state, comma separated")->delimiter(',');
    CLI::Option* stepsopt = simulate->add_option("--steps", ma.steps, "rollout length")
                                ->check(CLI::PositiveNumber);
    CLI::Option* lkopt =
        simulate->add_option("--lookahead", ma.lookahead, "exact_state or nearest_node");

    ReproduceArgs ra;
    CLI::App* reproduce =
        app.add_subcommand("reproduce", "rerun the benchmark study and compare tables");
    reproduce->add_option("--which", ra.which, "table1, table2 or all")
        ->check(CLI::IsMember({"table1", "table2", "all"}));
    reproduce->add_option("--scale", ra.scale, "full or smoke")
        ->check(CLI::IsMember({"full", "smoke"}));
    reproduce->add_option("--out", ra.out, "directory for the comparison tables");
    reproduce->add_option("--workers", ra.workers, "worker threads")
        ->check(CLI::PositiveNumber);

    std::string inject;
    CLI::App* check = app.add_subcommand("check", "run the property self-checks");
    check->add_option("--inject", inject,
                      "deliberately corrupt one aspect to prove the checks catch it");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Usage mistakes are config errors as far as the exit contract goes;
        // --help and --version keep their zero exit.
        const int rc = app.exit(e);
        return rc == 0 ? vicert::kExitOk : vicert::kExitConfig;
    }

    try {
        if (app.got_subcommand(solve)) {
            vicert::RunConfig cfg = base_config(sa.config, sa.out);
            if (sa.workers > 0) cfg.workers = sa.workers;
            if (!sa.interp.empty()) cfg.interp = sa.interp;
            if (sa.csv) cfg.export_csv = true;
            return vicert::cmd_solve(cfg, std::cout);
        }
        if (app.got_subcommand(certify)) {
            vicert::RunConfig cfg = base_config(ca.config, ca.out);
            if (ca.workers > 0) cfg.workers = ca.workers;
            vicert::CertifyConfig cc = cfg.certify.value_or(vicert::CertifyConfig{});
            if (ca.lyapunov) cc.lyapunov = true;
            if (ca.require_exponential) cc.require_exponential = true;
            if (ca.require_semiglobal) cc.require_semiglobal = true;
            if (ht->count() > 0) cc.horizon_target = ca.horizon_target;
            if (dp->count() > 0) cc.delta_practical = ca.delta_practical;
            if (lm->count() > 0) cc.long_margin = ca.long_margin;
            cfg.certify = cc;
            return vicert::cmd_certify(cfg, std::cout);
        }
        if (app.got_subcommand(simulate)) {
            vicert::RunConfig cfg = base_config(ma.config, ma.out);
            if (x0opt->count() > 0 || stepsopt->count() > 0 || lkopt->count() > 0) {
                vicert::SimulateConfig sc = cfg.simulate.value_or(vicert::SimulateConfig{});
                if (x0opt->count() > 0) sc.x0 = ma.x0;
                if (stepsopt->count() > 0) sc.steps = ma.steps;
                if (lkopt->count() > 0) sc.lookahead = ma.lookahead;
                cfg.simulate = sc;
            }
            return vicert::cmd_simulate(cfg, std::cout);
        }
        if (app.got_subcommand(reproduce))
            return vicert::cmd_reproduce(ra.which, ra.scale, ra.out, ra.workers, std::cout);
        if (app.got_subcommand(check)) return vicert::cmd_check(std::cout, inject);
    } catch (const vicert::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return vicert::kExitConfig;
    } catch (const vicert::CertificateUnavailable& e) {
        std::cerr << "certificate unavailable: " << e.what() << "\n";
        return vicert::kExitCertificateUnavailable;
    } catch (const vicert::NumericError& e) {
        std::cerr << "numeric property violated: " << e.what() << "\n";
        return vicert::kExitPropertyFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return vicert::kExitInternal;
    }
    return vicert::kExitInternal; // unreachable: a subcommand is required
}
