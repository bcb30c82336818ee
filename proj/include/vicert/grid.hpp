#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vicert/errors.hpp"

namespace vicert {

enum class InterpMode { Multilinear, NearestNeighbor };

const char* interp_mode_name(InterpMode m);
InterpMode interp_mode_from_name(const std::string& name);

struct AxisSpec {
    double lower = 0.0;
    double upper = 0.0;
    int count = 0; // number of nodes on this axis, >= 2
};

// Regular rectangular grid, row-major with the last axis fastest.
//
// Node coordinates come from the two-sided lerp lo*(1-t) + hi*t with
// t = i/(count-1), which is exact at both corners and at dyadic interior
// points (e.g. the midpoint of a 3-node axis). value_at() relies on that:
// querying exactly at a node reproduces the stored value bit for bit.
class RectGrid {
public:
    RectGrid() = default;
    explicit RectGrid(std::vector<AxisSpec> axes);

    int dim() const { return static_cast<int>(axes_.size()); }
    std::int64_t node_count() const { return node_count_; }
    const std::vector<AxisSpec>& axes() const { return axes_; }
    const std::vector<std::int64_t>& strides() const { return strides_; }

    double coord(int axis, int i) const;
    void node_state(std::int64_t flat, double* out) const;
    std::vector<double> node_state_v(std::int64_t flat) const;

    std::int64_t flat_index(const int* multi) const;
    void multi_index(std::int64_t flat, int* out) const;

    // Nearest node to x after clamping into the box; coordinate ties resolve
    // to the lower index.
    std::int64_t nearest_node(const double* x) const;

    bool same_layout(const RectGrid& other) const;

private:
    std::vector<AxisSpec> axes_;
    std::vector<std::int64_t> strides_;
    std::vector<double> inv_step_; // (count-1)/(upper-lower) per axis
    std::int64_t node_count_ = 0;

    friend struct InterpPlan;
};

// State and input quantizations are the same structure; the aliases keep
// call sites readable.
using StateGrid = RectGrid;
using InputGrid = RectGrid;

struct ValueTable {
    RectGrid grid;
    std::vector<double> values;
    InterpMode interp = InterpMode::Multilinear;
};

ValueTable make_zero_table(const RectGrid& grid, InterpMode interp = InterpMode::Multilinear);

// Flattened per-axis lookup data for the sweep kernel: one make_plan per
// sweep, then eval() per (node, input) pair without touching the grid
// object. Out-of-box queries clamp to the boundary and report it.
struct InterpPlan {
    struct Axis {
        double lo, hi, inv_step;
        int count;
        std::int64_t stride;
    };
    Axis axis[8];
    int dim = 0;
    InterpMode mode = InterpMode::Multilinear;

    explicit InterpPlan(const RectGrid& grid, InterpMode mode);
    double eval(const double* values, const double* x, bool* clamped) const;
};

// Convenience wrapper over InterpPlan for cold call sites.
double value_at(const ValueTable& t, const double* x, bool* clamped = nullptr);
double value_at(const ValueTable& t, const std::vector<double>& x, bool* clamped = nullptr);

// Spread (max - min) of the stored values on the interpolation cell that a
// query at x reads. Zero exactly at nodes; used as the honest slack term
// when certificates are checked against interpolated tables.
double cell_spread(const ValueTable& t, const double* x);

// Binary snapshot, little-endian: "VITB", format version, interp mode, axis
// specs, then the raw value array. Round trips bit for bit.
void save_value_table(const std::string& path, const ValueTable& t);
ValueTable load_value_table(const std::string& path);

// Same container for an argmin-input table ("VIPT" magic, i32 payload).
void save_policy_table(const std::string& path, const RectGrid& grid,
                       const std::vector<std::int32_t>& policy);
std::pair<RectGrid, std::vector<std::int32_t>> load_policy_table(const std::string& path);

// CSV with one row per node: multi-index, node coordinates, value. Floats
// are shortest-round-trip formatted, so files are reproducible byte for byte.
void export_table_csv(const std::string& path, const ValueTable& t);
void export_policy_csv(const std::string& path, const RectGrid& grid,
                       const std::vector<std::int32_t>& policy, const RectGrid& inputs);

} // namespace vicert
