#pragma once

// Minimal CSV emission helpers: RFC-4180 layout, '.' decimal separator,
// full-precision round-trip formatting so reruns reproduce outputs bitwise.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace relkin {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os << ',';
        os << cells[i];
    }
    os << '\n';
}

}  // namespace relkin
