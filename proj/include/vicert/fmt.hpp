#pragma once

#include <charconv>
#include <string>

namespace vicert {

// Shortest decimal string that parses back to exactly the same double.
// Keeps CSV and JSON-lines output reproducible across runs.
inline std::string fmt_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

} // namespace vicert
