#include <doctest.h>

#include <fstream>

#include "vicert/commands.hpp"
#include "vicert/config.hpp"
#include "support.hpp"

using namespace vicert;
using nlohmann::json;

namespace {

RunConfig sample_config() {
    RunConfig c;
    c.problem = cubic_integrator_json();
    c.state_axes = {{-2.0, 2.0, 5}, {-2.0, 2.0, 5}};
    c.input_axes = {{-1.0, 1.0, 5}};
    c.stop = relative_criterion(0.01);
    c.d_max = 50;
    c.snap_successors = true;
    c.workers = 2;
    c.seed = 7;
    c.out_dir = "artifacts";
    c.export_csv = true;
    c.simulate = SimulateConfig{{1.0, 0.5}, 10, "nearest_node"};
    CertifyConfig cc;
    cc.horizon_target = 2.0;
    cc.delta_practical = 0.5;
    cc.lyapunov = true;
    cc.long_margin = 5;
    cc.require_exponential = true;
    c.certify = cc;
    return c;
}

// Minimal solvable config on the small cubic grids; returns the path.
std::string write_cli_config(const std::filesystem::path& dir, const json& criterion,
                             int d_max = 50) {
    json j;
    j["schema_version"] = 1;
    j["problem"] = {{"name", "cubic_integrator"}};
    j["state_grid"] = {{"bounds", {{-2.0, 2.0}, {-2.0, 2.0}}}, {"counts", {5, 5}}};
    j["input_grid"] = {{"bounds", {{-1.0, 1.0}}}, {"counts", {5}}};
    j["criterion"] = criterion;
    j["d_max"] = d_max;
    j["snap_successors"] = true;
    const std::filesystem::path path = dir / "config.json";
    std::ofstream os(path);
    os << j.dump(2) << "\n";
    return path.string();
}

} // namespace

TEST_CASE("run config round trips through json and disk") {
    const RunConfig c = sample_config();
    const RunConfig back = RunConfig::from_json(c.to_json());
    CHECK(back == c);
    CHECK(back.to_json() == c.to_json());

    const auto dir = testing::test_tmp_dir("config_round_trip");
    const std::string path = (dir / "cfg.json").string();
    save_config(path, c);
    CHECK(load_config(path) == c);

    // Emission is byte-stable.
    const std::string once = testing::read_file(path);
    save_config(path, c);
    CHECK(testing::read_file(path) == once);
}

TEST_CASE("run config validation is eager") {
    const json good = sample_config().to_json();

    auto mutated = [&good](const char* key, json v) {
        json j = good;
        j[key] = std::move(v);
        return j;
    };

    CHECK_THROWS_AS(RunConfig::from_json(mutated("schema_version", 2)), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(mutated("interp", "spline")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(mutated("d_max", -1)), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(mutated("workers", 0)), ConfigError);

    json bad_lookahead = good;
    bad_lookahead["simulate"]["lookahead"] = "magic";
    CHECK_THROWS_AS(RunConfig::from_json(bad_lookahead), ConfigError);

    json bad_steps = good;
    bad_steps["simulate"]["steps"] = -1;
    CHECK_THROWS_AS(RunConfig::from_json(bad_steps), ConfigError);

    json no_criterion = good;
    no_criterion.erase("criterion");
    CHECK_THROWS_AS(RunConfig::from_json(no_criterion), ConfigError);

    json tiny_axis = good;
    tiny_axis["state_grid"]["counts"][0] = 1;
    CHECK_THROWS_AS(RunConfig::from_json(tiny_axis), ConfigError);

    json bad_problem = good;
    bad_problem["problem"] = {{"name", "unknown_problem"}};
    CHECK_THROWS_AS(RunConfig::from_json(bad_problem), ConfigError);

    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("benchmark configs pin the study geometry") {
    const RunConfig full = benchmark_config("full", uniform_criterion(1.0));
    REQUIRE(full.state_axes.size() == 2);
    CHECK(full.state_axes[0].lower == -10.0);
    CHECK(full.state_axes[0].upper == 10.0);
    // Odd count: the grid must land a node exactly on the origin, otherwise
    // sweep gaps floor at the cheapest node's sigma and tight criteria hang.
    CHECK(full.state_axes[0].count == 341);
    CHECK(full.state_axes[0].count % 2 == 1);
    CHECK(full.state_axes[1].lower == -1000.0);
    CHECK(full.state_axes[1].upper == 1000.0);
    CHECK(full.state_axes[1].count == 341);
    REQUIRE(full.input_axes.size() == 1);
    CHECK(full.input_axes[0].lower == -20.0);
    CHECK(full.input_axes[0].upper == 20.0);
    CHECK(full.input_axes[0].count == 909);
    REQUIRE(full.simulate.has_value());
    CHECK(full.simulate->x0 == std::vector<double>{10.0, -1000.0});
    CHECK(full.simulate->steps == 40);
    CHECK(full.simulate->lookahead == "exact_state");

    const RunConfig smoke = benchmark_config("smoke", uniform_criterion(1.0));
    CHECK(smoke.state_axes[0].count == 101);
    CHECK(smoke.state_axes[1].count == 101);
    CHECK(smoke.state_axes[0].count % 2 == 1);
    // Input spacing must divide the x1 node spacing or odd nodes cannot be
    // steered onto the origin and tight relative runs never terminate.
    CHECK(smoke.input_axes[0].count == 201);

    CHECK_THROWS_AS(benchmark_config("medium", uniform_criterion(1.0)), ConfigError);
}

TEST_CASE("cli solve writes a complete artifact set") {
    const auto dir = testing::test_tmp_dir("cli_solve");
    const std::string cfg = write_cli_config(dir, json{{"kind", "relative"},
                                                       {"epsilon", {0.01}}});
    const std::string out = (dir / "out").string();

    std::string log;
    const int rc = testing::run_cli("solve --config " + cfg + " --out " + out, &log);
    CHECK(rc == 0);
    CHECK(log.find("stop rule met") != std::string::npos);

    for (const char* name : {"manifest.json", "value_table.bin", "value_prev.bin",
                             "policy.bin", "iterations.jsonl"})
        CHECK(std::filesystem::exists(dir / "out" / name));

    const json manifest = json::parse(testing::read_file(dir / "out" / "manifest.json"));
    CHECK(manifest["schema_version"] == 1);
    CHECK(manifest["result"]["stopped"] == true);
    CHECK(manifest["result"]["d"].get<int>() >= 0);
    CHECK(manifest["result"]["floor"]["kind"] == "linear");

    // The iteration log must be byte-stable run to run: no timings inside.
    const std::string itlog = testing::read_file(dir / "out" / "iterations.jsonl");
    CHECK(itlog.find("wall_ms") == std::string::npos);
    CHECK(itlog.find("\"max_gap\"") != std::string::npos);

    SUBCASE("certify on the artifacts") {
        std::string clog;
        const int crc = testing::run_cli("certify --out " + out, &clog);
        CHECK(crc == 0);
        CHECK(std::filesystem::exists(dir / "out" / "certificate.json"));
        const json cert = json::parse(testing::read_file(dir / "out" / "certificate.json"));
        CHECK(cert["exponential"]["applicable"] == true);
        CHECK(cert["conservative_horizon"] == 71);

        const int rrc = testing::run_cli("certify --out " + out + " --require-exponential");
        CHECK(rrc == 0);
    }

    SUBCASE("simulate on the artifacts") {
        std::string slog;
        const int src =
            testing::run_cli("simulate --out " + out + " --x0 1,2 --steps 5", &slog);
        CHECK(src == 0);
        CHECK(std::filesystem::exists(dir / "out" / "trajectory.csv"));
        CHECK(std::filesystem::exists(dir / "out" / "simulation.json"));
        const json summary = json::parse(testing::read_file(dir / "out" / "simulation.json"));
        CHECK(summary["envelope"]["claimed"] == true);
        CHECK(summary["envelope"]["violations"] == 0);
    }

    SUBCASE("solve is deterministic across worker counts") {
        const std::string out4 = (dir / "out4").string();
        const int rc4 =
            testing::run_cli("solve --config " + cfg + " --out " + out4 + " --workers 4");
        CHECK(rc4 == 0);
        CHECK(testing::read_file(dir / "out4" / "value_table.bin") ==
              testing::read_file(dir / "out" / "value_table.bin"));
        CHECK(testing::read_file(dir / "out4" / "policy.bin") ==
              testing::read_file(dir / "out" / "policy.bin"));
    }
}

TEST_CASE("cli exit codes follow the contract") {
    const auto dir = testing::test_tmp_dir("cli_exit_codes");

    SUBCASE("missing config file is a config error") {
        CHECK(testing::run_cli("solve --config /nonexistent/cfg.json") == 2);
    }

    SUBCASE("usage mistakes are config errors") {
        CHECK(testing::run_cli("solve") == 2);                  // --config required
        CHECK(testing::run_cli("frobnicate") == 2);             // unknown subcommand
        CHECK(testing::run_cli("reproduce --which bogus") == 2);
        CHECK(testing::run_cli("") == 2);                       // subcommand required
    }

    SUBCASE("help exits zero") {
        CHECK(testing::run_cli("--help") == 0);
        CHECK(testing::run_cli("solve --help") == 0);
    }

    SUBCASE("unknown interpolation mode is a config error") {
        const std::string cfg = write_cli_config(dir, json{{"kind", "uniform"},
                                                           {"epsilon", {0.5}}});
        const std::string out = (dir / "outx").string();
        CHECK(testing::run_cli("solve --config " + cfg + " --out " + out +
                               " --interp spline") == 2);
    }

    SUBCASE("exhausted depth budget reports non-termination") {
        const std::string cfg = write_cli_config(dir, json{{"kind", "uniform"},
                                                           {"epsilon", {0.0}}},
                                                 /*d_max=*/0);
        const std::string out = (dir / "out3").string();
        std::string log;
        CHECK(testing::run_cli("solve --config " + cfg + " --out " + out, &log) == 3);
        CHECK(log.find("NOT met") != std::string::npos);
    }

    SUBCASE("required certificate that cannot apply exits 4") {
        const std::string cfg = write_cli_config(dir, json{{"kind", "uniform"},
                                                           {"epsilon", {0.5}}});
        const std::string out = (dir / "out_uni").string();
        REQUIRE(testing::run_cli("solve --config " + cfg + " --out " + out) == 0);
        CHECK(testing::run_cli("certify --out " + out + " --require-exponential") == 4);
        // Without the requirement the refusal is recorded, not fatal.
        CHECK(testing::run_cli("certify --out " + out) == 0);
        const json cert =
            json::parse(testing::read_file(dir / "out_uni" / "certificate.json"));
        CHECK(cert["exponential"]["applicable"] == false);
    }

    SUBCASE("certify without artifacts is a config error") {
        CHECK(testing::run_cli("certify --out " + (dir / "empty_out").string()) == 2);
    }
}

TEST_CASE("cli self checks run clean and catch injected corruption") {
    CHECK(testing::run_cli("check") == 0);

    std::string log;
    CHECK(testing::run_cli("check --inject stage-cost-sign", &log) == 5);
    CHECK(log.find("[FAIL]") != std::string::npos);

    CHECK(testing::run_cli("check --inject bogus-knob") == 2);
}
