// Small shared bits for the CSV report writers.
#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "landkit/errors.hpp"

namespace landkit::csvu {

// RFC-4180 quoting, applied only when the field needs it.
inline std::string field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

inline std::ofstream open(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: '\n' endings everywhere
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("failed while writing: " + path);
}

// Paper-table style fixed four decimals.
inline std::string score(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

inline std::string number(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", value);
    return buf;
}

}  // namespace landkit::csvu
