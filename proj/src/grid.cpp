#include "vicert/grid.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "vicert/fmt.hpp"

static_assert(std::endian::native == std::endian::little,
              "snapshot format assumes a little-endian host");

namespace vicert {

const char* interp_mode_name(InterpMode m) {
    return m == InterpMode::Multilinear ? "multilinear" : "nearest";
}

InterpMode interp_mode_from_name(const std::string& name) {
    if (name == "multilinear")
        return InterpMode::Multilinear;
    if (name == "nearest")
        return InterpMode::NearestNeighbor;
    throw ConfigError("unknown interpolation mode: " + name);
}

RectGrid::RectGrid(std::vector<AxisSpec> axes) : axes_(std::move(axes)) {
    if (axes_.empty() || axes_.size() > 8)
        throw ConfigError("grid needs between 1 and 8 axes");
    node_count_ = 1;
    for (const auto& a : axes_) {
        if (a.count < 2)
            throw ConfigError("grid axis needs at least 2 nodes");
        if (!(a.lower < a.upper) || !std::isfinite(a.lower) || !std::isfinite(a.upper))
            throw ConfigError("grid axis bounds must be finite with lower < upper");
        if (node_count_ > (std::int64_t{1} << 40) / a.count)
            throw ConfigError("grid is too large");
        node_count_ *= a.count;
    }
    strides_.resize(axes_.size());
    std::int64_t s = 1;
    for (int d = dim() - 1; d >= 0; --d) {
        strides_[d] = s;
        s *= axes_[d].count;
    }
    inv_step_.resize(axes_.size());
    for (int d = 0; d < dim(); ++d)
        inv_step_[d] = (axes_[d].count - 1) / (axes_[d].upper - axes_[d].lower);
}

double RectGrid::coord(int axis, int i) const {
    const AxisSpec& a = axes_[axis];
    if (i < 0 || i >= a.count)
        throw DomainError("grid coord index out of range");
    const double t = static_cast<double>(i) / (a.count - 1);
    return a.lower * (1.0 - t) + a.upper * t;
}

void RectGrid::node_state(std::int64_t flat, double* out) const {
    for (int d = dim() - 1; d >= 0; --d) {
        const int i = static_cast<int>(flat % axes_[d].count);
        flat /= axes_[d].count;
        out[d] = coord(d, i);
    }
}

std::vector<double> RectGrid::node_state_v(std::int64_t flat) const {
    std::vector<double> out(dim());
    node_state(flat, out.data());
    return out;
}

std::int64_t RectGrid::flat_index(const int* multi) const {
    std::int64_t flat = 0;
    for (int d = 0; d < dim(); ++d) {
        if (multi[d] < 0 || multi[d] >= axes_[d].count)
            throw DomainError("grid multi-index out of range");
        flat += multi[d] * strides_[d];
    }
    return flat;
}

void RectGrid::multi_index(std::int64_t flat, int* out) const {
    if (flat < 0 || flat >= node_count_)
        throw DomainError("grid flat index out of range");
    for (int d = dim() - 1; d >= 0; --d) {
        out[d] = static_cast<int>(flat % axes_[d].count);
        flat /= axes_[d].count;
    }
}

std::int64_t RectGrid::nearest_node(const double* x) const {
    std::int64_t flat = 0;
    for (int d = 0; d < dim(); ++d) {
        const AxisSpec& a = axes_[d];
        double z = x[d];
        if (std::isnan(z))
            throw DomainError("nearest_node: NaN coordinate");
        z = std::min(std::max(z, a.lower), a.upper);
        double t = (z - a.lower) * inv_step_[d];
        t = std::min(std::max(t, 0.0), static_cast<double>(a.count - 1));
        const int i = static_cast<int>(t);
        const double frac = t - i;
        flat += (frac > 0.5 ? i + 1 : i) * strides_[d];
    }
    return flat;
}

bool RectGrid::same_layout(const RectGrid& other) const {
    if (dim() != other.dim())
        return false;
    for (int d = 0; d < dim(); ++d) {
        if (axes_[d].lower != other.axes_[d].lower || axes_[d].upper != other.axes_[d].upper ||
            axes_[d].count != other.axes_[d].count)
            return false;
    }
    return true;
}

ValueTable make_zero_table(const RectGrid& grid, InterpMode interp) {
    ValueTable t;
    t.grid = grid;
    t.values.assign(static_cast<size_t>(grid.node_count()), 0.0);
    t.interp = interp;
    return t;
}

InterpPlan::InterpPlan(const RectGrid& grid, InterpMode m) {
    dim = grid.dim();
    mode = m;
    for (int d = 0; d < dim; ++d) {
        axis[d].lo = grid.axes()[d].lower;
        axis[d].hi = grid.axes()[d].upper;
        axis[d].inv_step = grid.inv_step_[d];
        axis[d].count = grid.axes()[d].count;
        axis[d].stride = grid.strides()[d];
    }
}

namespace {

// Fractions this close to a node collapse onto it. Node coordinates computed
// by the lerp in coord() land within a few ulp of an integer in t-space, far
// below this threshold, so querying at a node always hits it exactly.
constexpr double kFracSnap = 1e-9;

} // namespace

double InterpPlan::eval(const double* values, const double* x, bool* clamped) const {
    int lo_idx[8], hi_idx[8];
    double frac[8];
    bool hit_bound = false;

    for (int d = 0; d < dim; ++d) {
        const Axis& a = axis[d];
        double z = x[d];
        if (std::isnan(z))
            throw DomainError("interpolation query has a NaN coordinate");
        if (z < a.lo) {
            z = a.lo;
            hit_bound = true;
        } else if (z > a.hi) {
            z = a.hi;
            hit_bound = true;
        }
        double t = (z - a.lo) * a.inv_step;
        const double tmax = static_cast<double>(a.count - 1);
        t = std::min(std::max(t, 0.0), tmax);
        int i = static_cast<int>(t);
        double f = t - i;
        if (f <= kFracSnap) {
            f = 0.0;
        } else if (f >= 1.0 - kFracSnap) {
            ++i;
            f = 0.0;
        }
        if (i > a.count - 1)
            i = a.count - 1;
        lo_idx[d] = i;
        hi_idx[d] = f > 0.0 ? i + 1 : i;
        frac[d] = f;
    }
    if (clamped)
        *clamped = hit_bound;

    if (mode == InterpMode::NearestNeighbor) {
        std::int64_t idx = 0;
        for (int d = 0; d < dim; ++d)
            idx += (frac[d] > 0.5 ? hi_idx[d] : lo_idx[d]) * axis[d].stride;
        return values[idx];
    }

    if (dim == 2) {
        // Same corner order and summation order as the generic loop below.
        const double f0 = frac[0], f1 = frac[1];
        const std::int64_t r0 = lo_idx[0] * axis[0].stride, r1 = hi_idx[0] * axis[0].stride;
        const std::int64_t c0 = lo_idx[1] * axis[1].stride, c1 = hi_idx[1] * axis[1].stride;
        double acc = (1.0 - f0) * (1.0 - f1) * values[r0 + c0];
        acc += (1.0 - f0) * f1 * values[r0 + c1];
        acc += f0 * (1.0 - f1) * values[r1 + c0];
        acc += f0 * f1 * values[r1 + c1];
        return acc;
    }

    double acc = 0.0;
    for (unsigned mask = 0; mask < (1u << dim); ++mask) {
        double w = 1.0;
        std::int64_t idx = 0;
        for (int d = 0; d < dim; ++d) {
            const bool high = (mask >> (dim - 1 - d)) & 1u;
            w *= high ? frac[d] : 1.0 - frac[d];
            idx += (high ? hi_idx[d] : lo_idx[d]) * axis[d].stride;
        }
        acc += w * values[idx];
    }
    return acc;
}

double value_at(const ValueTable& t, const double* x, bool* clamped) {
    InterpPlan plan(t.grid, t.interp);
    return plan.eval(t.values.data(), x, clamped);
}

double cell_spread(const ValueTable& t, const double* x) {
    const InterpPlan plan(t.grid, InterpMode::Multilinear);
    const int n = plan.dim;
    int lo_idx[8], hi_idx[8];
    for (int d = 0; d < n; ++d) {
        const InterpPlan::Axis& a = plan.axis[d];
        double z = std::min(std::max(x[d], a.lo), a.hi);
        double tpos = (z - a.lo) * a.inv_step;
        tpos = std::min(std::max(tpos, 0.0), static_cast<double>(a.count - 1));
        int i = static_cast<int>(tpos);
        double f = tpos - i;
        if (f <= 1e-9)
            f = 0.0;
        else if (f >= 1.0 - 1e-9) {
            ++i;
            f = 0.0;
        }
        if (i > a.count - 1)
            i = a.count - 1;
        lo_idx[d] = i;
        hi_idx[d] = f > 0.0 ? i + 1 : i;
    }
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -vmin;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::int64_t idx = 0;
        for (int d = 0; d < n; ++d) {
            const bool high = (mask >> (n - 1 - d)) & 1u;
            idx += (high ? hi_idx[d] : lo_idx[d]) * plan.axis[d].stride;
        }
        vmin = std::min(vmin, t.values[static_cast<size_t>(idx)]);
        vmax = std::max(vmax, t.values[static_cast<size_t>(idx)]);
    }
    return vmax - vmin;
}

double value_at(const ValueTable& t, const std::vector<double>& x, bool* clamped) {
    if (static_cast<int>(x.size()) != t.grid.dim())
        throw DomainError("value_at: query dimension mismatch");
    return value_at(t, x.data(), clamped);
}

namespace {

constexpr std::uint32_t kTableFormatVersion = 1;

void write_bytes(std::ofstream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& is, void* p, size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is)
        throw NumericError("snapshot file truncated");
}

void write_header(std::ofstream& os, const char magic[4], const RectGrid& grid,
                  std::uint8_t mode_tag) {
    write_bytes(os, magic, 4);
    std::uint32_t v = kTableFormatVersion;
    write_bytes(os, &v, 4);
    write_bytes(os, &mode_tag, 1);
    std::uint8_t reserved = 0;
    write_bytes(os, &reserved, 1);
    std::uint16_t dim = static_cast<std::uint16_t>(grid.dim());
    write_bytes(os, &dim, 2);
    for (const auto& a : grid.axes()) {
        write_bytes(os, &a.lower, 8);
        write_bytes(os, &a.upper, 8);
        std::uint32_t c = static_cast<std::uint32_t>(a.count);
        write_bytes(os, &c, 4);
    }
}

RectGrid read_header(std::ifstream& is, const char expect_magic[4], std::uint8_t* mode_tag) {
    char magic[4];
    read_bytes(is, magic, 4);
    if (std::memcmp(magic, expect_magic, 4) != 0)
        throw ConfigError("snapshot has wrong magic (not a table of the expected kind)");
    std::uint32_t v = 0;
    read_bytes(is, &v, 4);
    if (v != kTableFormatVersion)
        throw ConfigError("unsupported snapshot format version " + std::to_string(v));
    read_bytes(is, mode_tag, 1);
    std::uint8_t reserved = 0;
    read_bytes(is, &reserved, 1);
    std::uint16_t dim = 0;
    read_bytes(is, &dim, 2);
    if (dim < 1 || dim > 8)
        throw ConfigError("snapshot has invalid dimension");
    std::vector<AxisSpec> axes(dim);
    for (auto& a : axes) {
        read_bytes(is, &a.lower, 8);
        read_bytes(is, &a.upper, 8);
        std::uint32_t c = 0;
        read_bytes(is, &c, 4);
        a.count = static_cast<int>(c);
    }
    return RectGrid(std::move(axes));
}

} // namespace

void save_value_table(const std::string& path, const ValueTable& t) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw ConfigError("cannot open " + path + " for writing");
    write_header(os, "VITB", t.grid, t.interp == InterpMode::Multilinear ? 0 : 1);
    write_bytes(os, t.values.data(), t.values.size() * sizeof(double));
    if (!os)
        throw NumericError("short write to " + path);
}

ValueTable load_value_table(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ConfigError("cannot open " + path);
    std::uint8_t mode_tag = 0;
    ValueTable t;
    t.grid = read_header(is, "VITB", &mode_tag);
    t.interp = mode_tag == 0 ? InterpMode::Multilinear : InterpMode::NearestNeighbor;
    t.values.resize(static_cast<size_t>(t.grid.node_count()));
    read_bytes(is, t.values.data(), t.values.size() * sizeof(double));
    return t;
}

void save_policy_table(const std::string& path, const RectGrid& grid,
                       const std::vector<std::int32_t>& policy) {
    if (policy.size() != static_cast<size_t>(grid.node_count()))
        throw DomainError("policy size does not match grid");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw ConfigError("cannot open " + path + " for writing");
    write_header(os, "VIPT", grid, 0);
    write_bytes(os, policy.data(), policy.size() * sizeof(std::int32_t));
    if (!os)
        throw NumericError("short write to " + path);
}

std::pair<RectGrid, std::vector<std::int32_t>> load_policy_table(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ConfigError("cannot open " + path);
    std::uint8_t mode_tag = 0;
    RectGrid grid = read_header(is, "VIPT", &mode_tag);
    std::vector<std::int32_t> policy(static_cast<size_t>(grid.node_count()));
    read_bytes(is, policy.data(), policy.size() * sizeof(std::int32_t));
    return {std::move(grid), std::move(policy)};
}

void export_table_csv(const std::string& path, const ValueTable& t) {
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw ConfigError("cannot open " + path + " for writing");
    const int n = t.grid.dim();
    for (int d = 0; d < n; ++d)
        os << "i" << d << ",";
    for (int d = 0; d < n; ++d)
        os << "x" << d << ",";
    os << "value\n";
    std::vector<int> mi(n);
    std::vector<double> xs(n);
    for (std::int64_t flat = 0; flat < t.grid.node_count(); ++flat) {
        t.grid.multi_index(flat, mi.data());
        t.grid.node_state(flat, xs.data());
        for (int d = 0; d < n; ++d)
            os << mi[d] << ",";
        for (int d = 0; d < n; ++d)
            os << fmt_double(xs[d]) << ",";
        os << fmt_double(t.values[static_cast<size_t>(flat)]) << "\n";
    }
}

void export_policy_csv(const std::string& path, const RectGrid& grid,
                       const std::vector<std::int32_t>& policy, const RectGrid& inputs) {
    if (policy.size() != static_cast<size_t>(grid.node_count()))
        throw DomainError("policy size does not match grid");
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw ConfigError("cannot open " + path + " for writing");
    const int n = grid.dim();
    const int m = inputs.dim();
    for (int d = 0; d < n; ++d)
        os << "x" << d << ",";
    os << "input_index";
    for (int d = 0; d < m; ++d)
        os << ",u" << d;
    os << "\n";
    std::vector<double> xs(n), us(m);
    for (std::int64_t flat = 0; flat < grid.node_count(); ++flat) {
        grid.node_state(flat, xs.data());
        for (int d = 0; d < n; ++d)
            os << fmt_double(xs[d]) << ",";
        const std::int32_t j = policy[static_cast<size_t>(flat)];
        os << j;
        inputs.node_state(j, us.data());
        for (int d = 0; d < m; ++d)
            os << "," << fmt_double(us[d]);
        os << "\n";
    }
}

} // namespace vicert
