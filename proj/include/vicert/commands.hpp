#pragma once

#include <ostream>
#include <string>

#include "vicert/config.hpp"

namespace vicert {

// Process exit codes shared by the CLI and the command entry points.
enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitConfig = 2,
    kExitNotTerminated = 3,            // solve hit d_max before the stop rule fired
    kExitCertificateUnavailable = 4,   // a required certificate could not be produced
    kExitPropertyFailure = 5,          // a runtime self-check or audited bound failed
};

// Solves the configured problem and writes the artifact set into
// config.out_dir: manifest.json, value_table.bin (V_d), value_prev.bin
// (V_{d-1}), policy.bin, iterations.jsonl, plus CSV mirrors on request.
// Artifacts are written even when the run exhausts d_max.
int cmd_solve(const RunConfig& config, std::ostream& log);

// Rebuilds the run from the artifacts in config.out_dir and writes
// certificate.json next to them. The optional Lyapunov audit re-solves the
// problem config.certify->long_margin sweeps deeper and checks the certified
// decrease along a rollout, so it needs a simulate section.
int cmd_certify(const RunConfig& config, std::ostream& log);

// Rolls out the greedy policy of the solved run and writes trajectory.csv.
// When the run's criterion supports the exponential certificate, the decay
// envelope is checked along the trajectory and exported as an extra column.
int cmd_simulate(const RunConfig& config, std::ostream& log);

// Reruns the benchmark study and writes table1.csv / table2.csv comparisons.
// which is "table1", "table2" or "all"; scale is "full" or "smoke".
int cmd_reproduce(const std::string& which, const std::string& scale,
                  const std::string& out_dir, int workers, std::ostream& log);

// Self-contained property suites (inverse round trips, interpolation
// exactness, backup vs. brute-force enumeration, detectability sampling).
// A nonempty inject name deliberately corrupts the named aspect to prove the
// corresponding check catches it; "stage-cost-sign" is the one supported.
int cmd_check(std::ostream& log, const std::string& inject = "");

} // namespace vicert
