#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vicert/engine.hpp"

namespace vicert {

// One stopping-rule cell of the termination-depth table: the first sweep count
// at which the rule fires on the benchmark grid.
struct Table1Cell {
    std::string kind;
    double eps = 0.0;
    int d_computed = -1; // -1: did not fire within the sweep cap
    std::optional<int> d_reference;
    bool match = false; // d_computed == d_reference (only meaningful at full scale)
};

// One rollout column: closed-loop cost and final measure after 40 steps when
// the lookahead table is V_{d-1}.
struct Table2Column {
    int d = 0;
    double v_run = 0.0;
    double sigma_final = 0.0;
    std::optional<double> v_run_reference;
    std::optional<double> sigma_reference;
};

struct ReproductionResult {
    std::string scale;
    int sweeps = 0; // backups actually performed
    std::vector<Table1Cell> table1;
    std::vector<Table2Column> table2;
    std::vector<double> max_gap_by_d; // max over all nodes, indexed by sweep
};

// Runs the cubic-integrator benchmark once and evaluates every stopping rule
// against the shared sweep history (the value tables do not depend on the
// rule, so one pass serves all cells). scale is "full" or "smoke"; reference
// columns are attached only at full scale.
ReproductionResult reproduce_benchmark(
    const std::string& scale, int workers,
    const std::function<void(const IterationRecord&)>& progress = {});

void export_table1_csv(const std::string& path, const ReproductionResult& r);
void export_table2_csv(const std::string& path, const ReproductionResult& r);

} // namespace vicert
