#pragma once

#include <charconv>
#include <string>

namespace covkit {

/// Shortest round-trip decimal representation; keeps text outputs
/// byte-reproducible across runs.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace covkit
