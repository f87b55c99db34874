#pragma once
// Deterministic text formatting for artifacts.  All doubles are rendered with
// %.17g, which round-trips binary64 exactly and never depends on locale.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "peakdec/errors.hpp"

namespace peakdec {

inline std::string f64_string(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double f64_parse(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw io_error("malformed floating-point value '" + s + "'");
    return v;
}

}  // namespace peakdec
